#pragma once

#include "hopflab/config.hpp"
#include "hopflab/verify.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hopflab {

inline constexpr const char* kReportSchema = "hopflab.report/1";

/// One line of report.jsonl.
struct ReportRecord {
    std::string group;  ///< suite row or task name
    std::uint64_t seed = 0;
    VerificationReport report;
};

Json record_to_json(const ReportRecord& r);

/// Numeric table with a header row; cells are written with 17 significant digits.
struct CsvTable {
    std::string name;  ///< file stem
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

std::string to_csv(const CsvTable& t);
CsvTable read_csv(const std::filesystem::path& path);

/// SVG 1.1 chosen from the header: (x, y, value) heat map, (value) histogram,
/// otherwise line plot of every column against the first.
std::string plot_svg(const CsvTable& t, const std::string& title);

/// Per-check counts of each verdict and the smallest margin.
std::string summary_table(const std::vector<ReportRecord>& records);

/// Writes report.jsonl, summary.txt, the CSVs and their plots, and metadata.json
/// (the only file that carries timestamps).
class OutputWriter {
public:
    explicit OutputWriter(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    /// Writes name.csv and name.svg (titled by name, so replotting is exact).
    std::vector<std::string> table(const CsvTable& t);
    void reports(const std::vector<ReportRecord>& records, const std::string& extra_summary = {});
    void metadata(const Json& meta);
    void text(const std::string& name, const std::string& content);

private:
    std::filesystem::path dir_;
};

/// Output root: $HOPFLAB_OUT or ./hopflab-out.
std::filesystem::path output_root();

/// Regenerates name.svg for every name.csv in dir; returns the count.
std::size_t replot_directory(const std::filesystem::path& dir);

}  // namespace hopflab
