#include "hopflab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace hopflab {

namespace {

std::string num(double x, int digits = 17) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

Json json_number(double x) {
    if (std::isfinite(x)) return x;
    return num(x);  // JSON has no NaN/inf; keep them readable
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0 = 60, y0 = 30, w = 520, h = 340;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;

    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void widen(double& lo, double& hi) {
    if (!(hi > lo)) {
        const double pad = std::max(1e-12, std::abs(lo) * 0.05 + 1e-12);
        lo -= pad;
        hi += pad;
    }
}

std::string svg_open(const std::string& title) {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n"
      << "<text x=\"320\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
      << escape_xml(title) << "</text>\n";
    return s.str();
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    std::ostringstream s;
    s << "<rect x=\"" << f.x0 << "\" y=\"" << f.y0 << "\" width=\"" << f.w << "\" height=\"" << f.h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double xv = f.xmin + (f.xmax - f.xmin) * k / 4.0;
        double yv = f.ymin + (f.ymax - f.ymin) * k / 4.0;
        if (std::abs(xv) < 1e-9 * (f.xmax - f.xmin)) xv = 0.0;
        if (std::abs(yv) < 1e-9 * (f.ymax - f.ymin)) yv = 0.0;
        s << "<text x=\"" << num(f.px(xv), 6) << "\" y=\"" << f.y0 + f.h + 14
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << num(xv, 4) << "</text>\n";
        s << "<text x=\"" << f.x0 - 4 << "\" y=\"" << num(f.py(yv) + 3, 6)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(yv, 4) << "</text>\n";
    }
    s << "<text x=\"" << f.x0 + f.w / 2 << "\" y=\"" << f.y0 + f.h + 30
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << escape_xml(xlabel) << "</text>\n";
    s << "<text x=\"14\" y=\"" << f.y0 + f.h / 2 << "\" font-family=\"sans-serif\" font-size=\"11\" "
      << "text-anchor=\"middle\" transform=\"rotate(-90 14 " << f.y0 + f.h / 2 << ")\">" << escape_xml(ylabel)
      << "</text>\n";
    return s.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string line_plot(const CsvTable& t, const std::string& title) {
    Frame f;
    f.xmin = f.ymin = std::numeric_limits<double>::infinity();
    f.xmax = f.ymax = -std::numeric_limits<double>::infinity();
    for (const auto& r : t.rows) {
        if (!std::isfinite(r[0])) continue;
        f.xmin = std::min(f.xmin, r[0]);
        f.xmax = std::max(f.xmax, r[0]);
        for (std::size_t c = 1; c < r.size(); ++c)
            if (std::isfinite(r[c])) {
                f.ymin = std::min(f.ymin, r[c]);
                f.ymax = std::max(f.ymax, r[c]);
            }
    }
    if (!std::isfinite(f.xmin)) f.xmin = 0, f.xmax = 1;
    if (!std::isfinite(f.ymin)) f.ymin = 0, f.ymax = 1;
    widen(f.xmin, f.xmax);
    widen(f.ymin, f.ymax);
    std::ostringstream s;
    s << svg_open(title) << axes(f, t.header[0], t.header.size() == 2 ? t.header[1] : "value");
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        const char* colour = kPalette[(c - 1) % 6];
        s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& r : t.rows)
            if (std::isfinite(r[0]) && std::isfinite(r[c])) s << num(f.px(r[0]), 6) << "," << num(f.py(r[c]), 6) << " ";
        s << "\"/>\n";
        if (t.header.size() > 2)
            s << "<text x=\"" << f.x0 + f.w - 4 << "\" y=\"" << f.y0 + 14 * static_cast<double>(c)
              << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\" fill=\"" << colour << "\">"
              << escape_xml(t.header[c]) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string heat_map(const CsvTable& t, const std::string& title) {
    Frame f;
    f.w = 440;
    std::vector<double> xs, ys;
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (const auto& r : t.rows) {
        xs.push_back(r[0]);
        ys.push_back(r[1]);
        if (std::isfinite(r[2])) vmin = std::min(vmin, r[2]), vmax = std::max(vmax, r[2]);
    }
    if (!std::isfinite(vmin)) vmin = 0, vmax = 1;
    widen(vmin, vmax);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    auto spacing = [](const std::vector<double>& v) {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < v.size(); ++i) d = std::min(d, v[i] - v[i - 1]);
        return std::isfinite(d) ? d : 1.0;
    };
    const double dx = spacing(xs), dy = spacing(ys);
    f.xmin = xs.empty() ? 0 : xs.front() - dx / 2;
    f.xmax = xs.empty() ? 1 : xs.back() + dx / 2;
    f.ymin = ys.empty() ? 0 : ys.front() - dy / 2;
    f.ymax = ys.empty() ? 1 : ys.back() + dy / 2;
    widen(f.xmin, f.xmax);
    widen(f.ymin, f.ymax);
    std::ostringstream s;
    s << svg_open(title) << axes(f, t.header[0], t.header[1]);
    auto colour = [&](double v) {
        const double u = std::clamp((v - vmin) / (vmax - vmin), 0.0, 1.0);
        const int r = static_cast<int>(std::lround(255 * u));
        const int b = static_cast<int>(std::lround(255 * (1 - u)));
        const int g = static_cast<int>(std::lround(255 * (1 - std::abs(2 * u - 1)) * 0.8));
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };
    const double cw = f.w * dx / (f.xmax - f.xmin), ch = f.h * dy / (f.ymax - f.ymin);
    for (const auto& r : t.rows) {
        if (!std::isfinite(r[2])) continue;
        s << "<rect x=\"" << num(f.px(r[0]) - cw / 2, 6) << "\" y=\"" << num(f.py(r[1]) - ch / 2, 6)
          << "\" width=\"" << num(cw, 6) << "\" height=\"" << num(ch, 6) << "\" fill=\"" << colour(r[2])
          << "\"/>\n";
    }
    for (int k = 0; k <= 10; ++k) {
        const double v = vmin + (vmax - vmin) * k / 10.0;
        s << "<rect x=\"540\" y=\"" << num(f.y0 + f.h - (k + 1) * f.h / 11.0, 6) << "\" width=\"16\" height=\""
          << num(f.h / 11.0, 6) << "\" fill=\"" << colour(v) << "\"/>\n";
        if (k % 5 == 0)
            s << "<text x=\"560\" y=\"" << num(f.y0 + f.h - (k + 0.5) * f.h / 11.0 + 3, 6)
              << "\" font-family=\"sans-serif\" font-size=\"10\">" << num(v, 4) << "</text>\n";
    }
    s << "<text x=\"548\" y=\"" << f.y0 - 6 << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << escape_xml(t.header[2]) << "</text>\n</svg>\n";
    return s.str();
}

std::string histogram(const CsvTable& t, const std::string& title) {
    std::vector<double> v;
    for (const auto& r : t.rows)
        if (std::isfinite(r[0])) v.push_back(r[0]);
    Frame f;
    f.xmin = v.empty() ? 0 : *std::min_element(v.begin(), v.end());
    f.xmax = v.empty() ? 1 : *std::max_element(v.begin(), v.end());
    widen(f.xmin, f.xmax);
    const int bins = 30;
    std::vector<int> counts(bins, 0);
    for (double x : v) {
        const int b = std::min(bins - 1, static_cast<int>((x - f.xmin) / (f.xmax - f.xmin) * bins));
        ++counts[static_cast<std::size_t>(b)];
    }
    f.ymin = 0;
    f.ymax = std::max(1, *std::max_element(counts.begin(), counts.end()));
    std::ostringstream s;
    s << svg_open(title) << axes(f, t.header[0], "count");
    const double bw = (f.xmax - f.xmin) / bins;
    for (int b = 0; b < bins; ++b) {
        if (!counts[static_cast<std::size_t>(b)]) continue;
        const double x = f.xmin + b * bw;
        const double top = f.py(counts[static_cast<std::size_t>(b)]);
        s << "<rect x=\"" << num(f.px(x), 6) << "\" y=\"" << num(top, 6) << "\" width=\""
          << num(f.px(x + bw) - f.px(x), 6) << "\" height=\"" << num(f.y0 + f.h - top, 6)
          << "\" fill=\"#1f77b4\" stroke=\"white\"/>\n";
    }
    if (f.xmin < 0 && f.xmax > 0)
        s << "<line x1=\"" << num(f.px(0), 6) << "\" y1=\"" << f.y0 << "\" x2=\"" << num(f.px(0), 6) << "\" y2=\""
          << f.y0 + f.h << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    s << "</svg>\n";
    return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
}

}  // namespace

Json record_to_json(const ReportRecord& r) {
    const auto& rep = r.report;
    Json j;
    j["schema"] = kReportSchema;
    j["group"] = r.group;
    j["check"] = rep.check;
    j["seed"] = r.seed;
    j["digest"] = rep.digest;
    j["verdict"] = to_string(rep.verdict);
    j["margin"] = json_number(rep.margin);
    j["tolerance"] = json_number(rep.tolerance);
    j["tolerance_note"] = rep.tolerance_note;
    j["note"] = rep.note;
    Json values = Json::object();
    for (const auto& [k, v] : rep.values) values[k] = json_number(v);
    j["values"] = values;
    j["artifacts"] = rep.artifacts;
    return j;
}

std::string to_csv(const CsvTable& t) {
    std::ostringstream s;
    for (std::size_t i = 0; i < t.header.size(); ++i) s << (i ? "," : "") << t.header[i];
    s << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << num(r[i]);
        s << "\n";
    }
    return s.str();
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    CsvTable t;
    t.name = path.stem().string();
    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV '" + path.string() + "'");
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream rs(line);
        for (std::string cell; std::getline(rs, cell, ',');) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != t.header.size()) throw Error("ragged row in '" + path.string() + "'");
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string plot_svg(const CsvTable& t, const std::string& title) {
    if (t.header.empty()) throw ContractViolation("table has no columns");
    if (t.header.size() == 1) return histogram(t, title);
    if (t.header.size() == 3 && t.header[0] == "x" && t.header[1] == "y") return heat_map(t, title);
    return line_plot(t, title);
}

std::string summary_table(const std::vector<ReportRecord>& records) {
    struct Row {
        std::map<Verdict, std::size_t> n;
        double min_margin = std::numeric_limits<double>::infinity();
        std::size_t total = 0;
    };
    std::vector<std::string> order;
    std::map<std::string, Row> rows;
    for (const auto& r : records) {
        const auto key = r.group + " / " + r.report.check;
        if (!rows.count(key)) order.push_back(key);
        auto& row = rows[key];
        ++row.total;
        ++row.n[r.report.verdict];
        if (r.report.verdict == Verdict::Pass || r.report.verdict == Verdict::Fail)
            row.min_margin = std::min(row.min_margin, r.report.margin);
    }
    std::ostringstream s;
    s << std::left << std::setw(44) << "group / check" << std::right << std::setw(7) << "cases" << std::setw(6) << "PASS"
      << std::setw(6) << "FAIL" << std::setw(8) << "VACUOUS" << std::setw(6) << "N/A" << std::setw(6) << "INFO"
      << std::setw(7) << "XFAIL" << std::setw(14) << "min margin" << "\n";
    for (const auto& key : order) {
        auto& row = rows[key];
        s << std::left << std::setw(44) << key << std::right << std::setw(7) << row.total << std::setw(6)
          << row.n[Verdict::Pass] << std::setw(6) << row.n[Verdict::Fail] << std::setw(8) << row.n[Verdict::Vacuous]
          << std::setw(6) << row.n[Verdict::NotApplicable] << std::setw(6) << row.n[Verdict::Info] << std::setw(7)
          << row.n[Verdict::ExpectedFail] << std::setw(14)
          << (std::isfinite(row.min_margin) ? num(row.min_margin, 4) : std::string("-")) << "\n";
    }
    return s.str();
}

OutputWriter::OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::vector<std::string> OutputWriter::table(const CsvTable& t) {
    write_file(dir_ / (t.name + ".csv"), to_csv(t));
    // The plot is drawn from the file just written, so replotting reproduces it exactly.
    const auto reread = read_csv(dir_ / (t.name + ".csv"));
    write_file(dir_ / (t.name + ".svg"), plot_svg(reread, t.name));
    return {t.name + ".csv", t.name + ".svg"};
}

void OutputWriter::reports(const std::vector<ReportRecord>& records, const std::string& extra_summary) {
    std::ostringstream lines;
    for (const auto& r : records) lines << record_to_json(r).dump() << "\n";
    write_file(dir_ / "report.jsonl", lines.str());
    write_file(dir_ / "summary.txt", summary_table(records) + extra_summary);
}

void OutputWriter::metadata(const Json& meta) { write_file(dir_ / "metadata.json", meta.dump(2) + "\n"); }

void OutputWriter::text(const std::string& name, const std::string& content) { write_file(dir_ / name, content); }

std::filesystem::path output_root() {
    const char* env = std::getenv("HOPFLAB_OUT");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("hopflab-out");
}

std::size_t replot_directory(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> csvs;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".csv") csvs.push_back(e.path());
    std::sort(csvs.begin(), csvs.end());
    for (const auto& p : csvs) {
        const auto t = read_csv(p);
        auto svg = p;
        svg.replace_extension(".svg");
        write_file(svg, plot_svg(t, t.name));
    }
    return csvs.size();
}

}  // namespace hopflab
