#include "hopflab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hopflab {

namespace {

const std::map<std::string, std::vector<std::string>>& sections() {
    static const std::map<std::string, std::vector<std::string>> s = {
        {"", {"task", "operator", "domain", "killing", "grid", "mc", "seeds", "point", "tolerance", "barrier",
              "output", "suite"}},
        {"operator", {"preset", "dimension", "q", "b", "kernel"}},
        {"operator.kernel", {"variant", "intensity", "atoms", "radius", "index", "scale", "truncation", "inner_cutoff"}},
        {"domain", {"shape", "center", "radius", "lo", "hi", "r_in", "r_out", "name"}},
        {"killing", {"kind", "value", "center", "radius"}},
        {"grid", {"h"}},
        {"mc", {"dt", "t_max", "n_paths", "seed", "antithetic", "record_paths"}},
        {"seeds", {"first", "count"}},
        {"point", {"x0"}},
        {"tolerance", {"margin"}},
        {"barrier", {"K"}},
        {"output", {"dir"}},
        {"suite", {"name"}},
    };
    return s;
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) out += (out.empty() ? "" : ", ") + x;
    return out;
}

std::string qualified(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

void check_keys(const Json& j, const std::string& section) {
    if (!j.is_object()) throw ConfigError("'" + (section.empty() ? std::string("config") : section) + "' must be a table");
    const auto& valid = sections().at(section);
    for (const auto& [key, _] : j.items())
        if (std::find(valid.begin(), valid.end(), key) == valid.end())
            throw ConfigError("unknown key '" + qualified(section, key) + "'; valid keys: " + join(valid));
}

double number(const Json& j, const std::string& section, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError("'" + qualified(section, key) + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("'" + qualified(section, key) + "' must be finite");
    return x;
}

double required_number(const Json& j, const std::string& section, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing key '" + qualified(section, key) + "'");
    return number(j, section, key, 0.0);
}

std::uint64_t count(const Json& j, const std::string& section, const std::string& key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("'" + qualified(section, key) + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::string text(const Json& j, const std::string& section, const std::string& key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError("'" + qualified(section, key) + "' must be a string");
    return j.at(key).get<std::string>();
}

Vec vec(const Json& j, const std::string& name, int dim) {
    if (dim == 1 && j.is_number()) return Vec::Constant(1, j.get<double>());
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ConfigError("'" + name + "' must be an array of " + std::to_string(dim) + " numbers");
    Vec v(dim);
    for (int i = 0; i < dim; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) throw ConfigError("'" + name + "' must contain numbers");
        v(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

Mat mat(const Json& j, const std::string& name, int dim) {
    if (dim == 1 && j.is_number()) return Mat::Constant(1, 1, j.get<double>());
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ConfigError("'" + name + "' must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " array");
    Mat m(dim, dim);
    for (int i = 0; i < dim; ++i) m.row(i) = vec(j[static_cast<std::size_t>(i)], name, dim).transpose();
    return m;
}

Json to_json(const Vec& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

Json to_json(const Mat& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
    return a;
}

int dimension(const Json& j, const std::string& section) {
    const auto d = count(j, section, "dimension", 0);
    if (d < 1 || d > static_cast<std::uint64_t>(kMaxDim))
        throw ConfigError("'" + qualified(section, "dimension") + "' must be 1, 2 or 3");
    return static_cast<int>(d);
}

LevyKernelSpec kernel_from_json(const Json& j, int dim) {
    const std::string sec = "operator.kernel";
    check_keys(j, sec);
    const auto variant = text(j, sec, "variant", "zero");
    if (variant == "zero") return ZeroKernel{};
    if (variant == "atomic") {
        const double rate = required_number(j, sec, "intensity");
        if (rate < 0.0) throw ConfigError("'operator.kernel.intensity' must be >= 0");
        if (!j.contains("atoms") || !j.at("atoms").is_array() || j.at("atoms").empty())
            throw ConfigError("'operator.kernel.atoms' must be a non-empty array of {y, p}");
        std::vector<Atom> atoms;
        double total = 0.0;
        for (const auto& a : j.at("atoms")) {
            if (!a.is_object() || !a.contains("y") || !a.contains("p"))
                throw ConfigError("each atom needs 'y' and 'p'");
            Atom atom{vec(a.at("y"), "operator.kernel.atoms.y", dim), a.at("p").get<double>()};
            if (atom.prob < 0.0) throw ConfigError("atom probabilities must be >= 0");
            if (atom.y.norm() == 0.0) throw ConfigError("atoms at the origin are not jumps");
            total += atom.prob;
            atoms.push_back(atom);
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("atom probabilities must sum to 1");
        return FiniteActivityKernel::atomic_law(rate, atoms);
    }
    if (variant == "uniform-ball") {
        const double rate = required_number(j, sec, "intensity");
        const double radius = required_number(j, sec, "radius");
        if (rate < 0.0 || radius <= 0.0) throw ConfigError("uniform-ball needs intensity >= 0 and radius > 0");
        return FiniteActivityKernel::uniform_ball(rate, radius);
    }
    if (variant == "truncated-stable") {
        TruncatedStableKernel k;
        k.index = number(j, sec, "index", k.index);
        k.scale = number(j, sec, "scale", k.scale);
        k.truncation = number(j, sec, "truncation", k.truncation);
        k.inner_cutoff = number(j, sec, "inner_cutoff", k.inner_cutoff);
        if (!(k.index > 0.0 && k.index < 2.0)) throw ConfigError("'operator.kernel.index' must lie in (0, 2)");
        if (k.scale < 0.0) throw ConfigError("'operator.kernel.scale' must be >= 0");
        if (!(k.inner_cutoff > 0.0 && k.inner_cutoff < k.truncation))
            throw ConfigError("need 0 < inner_cutoff < truncation");
        return k;
    }
    throw ConfigError("unknown kernel variant '" + variant + "'; valid: zero, atomic, uniform-ball, truncated-stable");
}

Json kernel_to_json(const LevyKernelSpec& kernel) {
    Json j;
    if (std::holds_alternative<ZeroKernel>(kernel)) {
        j["variant"] = "zero";
    } else if (const auto* f = std::get_if<FiniteActivityKernel>(&kernel)) {
        if (!f->intensity_constant) throw ConfigError("only constant jump intensities are serialisable");
        if (f->atomic()) {
            j["variant"] = "atomic";
            j["intensity"] = *f->intensity_constant;
            Json atoms = Json::array();
            for (const auto& a : f->atoms) atoms.push_back({{"y", to_json(a.y)}, {"p", a.prob}});
            j["atoms"] = atoms;
        } else {
            j["variant"] = "uniform-ball";
            j["intensity"] = *f->intensity_constant;
            j["radius"] = f->ball_radius;
        }
    } else {
        const auto& t = std::get<TruncatedStableKernel>(kernel);
        j["variant"] = "truncated-stable";
        j["index"] = t.index;
        j["scale"] = t.scale;
        j["truncation"] = t.truncation;
        j["inner_cutoff"] = t.inner_cutoff;
    }
    return j;
}

}  // namespace

std::vector<std::string> operator_preset_names() {
    return {"laplacian", "anisotropic", "two-point-jump", "truncated-stable"};
}

OperatorSpec operator_preset(const std::string& name, int dim) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("preset dimension must be 1, 2 or 3");
    OperatorSpec op;
    op.name = name;
    const Mat id = Mat::Identity(dim, dim);
    if (name == "laplacian") {
        op.coeffs = CoefficientField::constant(id, Vec::Zero(dim));
    } else if (name == "anisotropic") {
        if (dim != 2) throw ConfigError("preset 'anisotropic' is two-dimensional");
        Mat q(2, 2);
        q << 1.0, 0.3, 0.3, 0.7;
        op.coeffs = CoefficientField::constant(q, make_vec({0.5, -0.25}));
    } else if (name == "two-point-jump") {
        op.coeffs = CoefficientField::constant(id, Vec::Zero(dim));
        op.kernel = FiniteActivityKernel::atomic_law(
            2.0, {Atom{unit_vec(dim, 0), 0.5}, Atom{-unit_vec(dim, 0), 0.5}});
    } else if (name == "truncated-stable") {
        op.coeffs = CoefficientField::constant(id, Vec::Zero(dim));
        op.kernel = TruncatedStableKernel{1.0, 1.0, 0.5, 0.1};
    } else {
        throw ConfigError("unknown operator preset '" + name + "'; valid: " + join(operator_preset_names()));
    }
    return op;
}

OperatorSpec operator_from_json(const Json& j) {
    const std::string sec = "operator";
    check_keys(j, sec);
    const int dim = j.contains("dimension") ? dimension(j, sec) : 2;
    if (j.contains("preset")) {
        for (const auto& key : {"q", "b", "kernel"})
            if (j.contains(key)) throw ConfigError("'operator.preset' cannot be combined with 'operator." + std::string(key) + "'");
        return operator_preset(text(j, sec, "preset", ""), dim);
    }
    if (!j.contains("dimension")) throw ConfigError("missing key 'operator.dimension'");
    const Mat q = j.contains("q") ? mat(j.at("q"), "operator.q", dim) : Mat(Mat::Identity(dim, dim));
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-14) throw ConfigError("'operator.q' must be symmetric");
    if (Eigen::SelfAdjointEigenSolver<Mat>(q).eigenvalues().minCoeff() < 0.0)
        throw ConfigError("'operator.q' must be positive semidefinite");
    const Vec b = j.contains("b") ? vec(j.at("b"), "operator.b", dim) : Vec(Vec::Zero(dim));
    OperatorSpec op;
    op.name = "custom";
    op.coeffs = CoefficientField::constant(q, b);
    if (j.contains("kernel")) op.kernel = kernel_from_json(j.at("kernel"), dim);
    return op;
}

Json operator_to_json(const OperatorSpec& op) {
    if (!op.coeffs.q_constant || !op.coeffs.b_constant)
        throw ConfigError("only constant-coefficient operators are serialisable");
    Json j;
    j["dimension"] = op.dim();
    j["q"] = to_json(*op.coeffs.q_constant);
    j["b"] = to_json(*op.coeffs.b_constant);
    j["kernel"] = kernel_to_json(op.kernel);
    return j;
}

DomainSpec domain_from_json(const Json& j) {
    const std::string sec = "domain";
    check_keys(j, sec);
    const auto shape = text(j, sec, "shape", "");
    if (shape == "implicit") {
        const auto name = text(j, sec, "name", "");
        const auto names = implicit_domain_names();
        if (std::find(names.begin(), names.end(), name) == names.end())
            throw ConfigError("unknown implicit domain '" + name + "'; valid: " + join(names));
        return implicit_domain(name);
    }
    auto point = [&](const char* key) {
        if (!j.contains(key)) throw ConfigError(std::string("missing key 'domain.") + key + "'");
        const auto& v = j.at(key);
        const int dim = v.is_array() ? static_cast<int>(v.size()) : 1;
        if (dim < 1 || dim > kMaxDim) throw ConfigError(std::string("'domain.") + key + "' must have 1 to 3 entries");
        return vec(v, std::string("domain.") + key, dim);
    };
    if (shape == "ball") {
        const double r = required_number(j, sec, "radius");
        if (r <= 0.0) throw ConfigError("'domain.radius' must be > 0");
        return DomainSpec(Ball{point("center"), r});
    }
    if (shape == "box") {
        const Vec lo = point("lo"), hi = point("hi");
        if (lo.size() != hi.size() || (hi - lo).minCoeff() <= 0.0)
            throw ConfigError("'domain.lo' must be below 'domain.hi' in every coordinate");
        return DomainSpec(Box{lo, hi});
    }
    if (shape == "annulus") {
        const double r_in = required_number(j, sec, "r_in"), r_out = required_number(j, sec, "r_out");
        if (!(r_in > 0.0 && r_out > r_in)) throw ConfigError("annulus needs 0 < r_in < r_out");
        return DomainSpec(Annulus{point("center"), r_in, r_out});
    }
    throw ConfigError("unknown domain shape '" + shape + "'; valid: ball, box, annulus, implicit");
}

Json domain_to_json(const DomainSpec& dom) {
    Json j;
    std::visit(
        [&j](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Ball>) {
                j = {{"shape", "ball"}, {"center", to_json(s.center)}, {"radius", s.radius}};
            } else if constexpr (std::is_same_v<S, Box>) {
                j = {{"shape", "box"}, {"lo", to_json(s.lo)}, {"hi", to_json(s.hi)}};
            } else if constexpr (std::is_same_v<S, Annulus>) {
                j = {{"shape", "annulus"}, {"center", to_json(s.center)}, {"r_in", s.r_in}, {"r_out", s.r_out}};
            } else {
                j = {{"shape", "implicit"}, {"name", s.name}};
            }
        },
        dom.shape());
    return j;
}

KillingRate KillingSpec::rate() const {
    if (kind == "uniform") return KillingRate::uniform(value);
    if (kind == "ball") return KillingRate::ball_indicator(center, radius, value);
    return KillingRate::zero();
}

KillingSpec killing_from_json(const Json& j, int dim) {
    const std::string sec = "killing";
    check_keys(j, sec);
    KillingSpec k;
    k.kind = text(j, sec, "kind", "zero");
    if (k.kind == "zero") return k;
    k.value = required_number(j, sec, "value");
    if (k.value < 0.0) throw ConfigError("'killing.value' must be >= 0");
    if (k.kind == "uniform") return k;
    if (k.kind == "ball") {
        if (!j.contains("center")) throw ConfigError("missing key 'killing.center'");
        k.center = vec(j.at("center"), "killing.center", dim);
        k.radius = required_number(j, sec, "radius");
        if (k.radius <= 0.0) throw ConfigError("'killing.radius' must be > 0");
        return k;
    }
    throw ConfigError("unknown killing kind '" + k.kind + "'; valid: zero, uniform, ball");
}

Json killing_to_json(const KillingSpec& k) {
    Json j{{"kind", k.kind}};
    if (k.kind == "zero") return j;
    j["value"] = k.value;
    if (k.kind == "ball") {
        j["center"] = to_json(k.center);
        j["radius"] = k.radius;
    }
    return j;
}

std::vector<std::string> task_names() {
    return {"operator-check",        "simulate",         "eigen",          "gauge",
            "barrier",               "suite",            "report",         "verify-weak-max",
            "verify-strong-max",     "verify-bony",      "verify-hopf",    "verify-qhl-IA",
            "verify-qhl-IB",         "verify-qhl-IIA",   "verify-qhl-IIB", "verify-delta-bound",
            "verify-weak-harnack",   "verify-harnack-corollary", "verify-mc-vs-grid"};
}

ScenarioConfig parse_scenario(const Json& j) {
    check_keys(j, "");
    for (const auto& [key, value] : j.items())
        if (key != "task" && !value.is_object()) throw ConfigError("'" + key + "' must be a table");
    ScenarioConfig s;
    s.raw = j;
    s.task = text(j, "", "task", "");
    const auto tasks = task_names();
    if (std::find(tasks.begin(), tasks.end(), s.task) == tasks.end())
        throw ConfigError("unknown task '" + s.task + "'; valid: " + join(tasks));

    const Json empty = Json::object();
    auto section = [&](const char* name) -> const Json& { return j.contains(name) ? j.at(name) : empty; };
    for (const auto& name : {"grid", "mc", "seeds", "point", "tolerance", "barrier", "output", "suite"})
        check_keys(section(name), name);

    s.suite = text(section("suite"), "suite", "name", s.suite);
    s.out_dir = text(section("output"), "output", "dir", s.task);
    const std::filesystem::path out(s.out_dir);
    if (s.out_dir.empty() || out.is_absolute() ||
        std::any_of(out.begin(), out.end(), [](const auto& p) { return p == ".."; }))
        throw ConfigError("'output.dir' must be a relative path inside the output root");

    const bool needs_problem = s.task != "suite" && s.task != "report";
    if (needs_problem) {
        if (!j.contains("operator")) throw ConfigError("missing table 'operator'");
        if (!j.contains("domain")) throw ConfigError("missing table 'domain'");
        s.op = operator_from_json(j.at("operator"));
        s.dom = domain_from_json(j.at("domain"));
        if (s.dom.dim() != s.op.dim())
            throw ConfigError("operator dimension " + std::to_string(s.op.dim()) + " does not match domain dimension " +
                              std::to_string(s.dom.dim()));
        s.killing = killing_from_json(section("killing"), s.op.dim());
        s.op = s.op.with_killing(s.killing.rate());
    }

    const auto& grid = section("grid");
    s.h = number(grid, "grid", "h", s.h);
    if (!(s.h > 0.0)) throw ConfigError("'grid.h' must be > 0");
    if (needs_problem) {
        const auto box = s.dom.bounding_box();
        if (s.h >= (box.hi - box.lo).minCoeff()) throw ConfigError("'grid.h' must be smaller than the domain");
    }

    const auto& mc = section("mc");
    s.mc.dt = number(mc, "mc", "dt", s.mc.dt);
    s.mc.T_max = number(mc, "mc", "t_max", s.mc.T_max);
    s.mc.n_paths = count(mc, "mc", "n_paths", s.mc.n_paths);
    s.mc.seed = count(mc, "mc", "seed", s.mc.seed);
    if (mc.contains("antithetic")) {
        if (!mc.at("antithetic").is_boolean()) throw ConfigError("'mc.antithetic' must be true or false");
        s.mc.antithetic = mc.at("antithetic").get<bool>();
    }
    if (mc.contains("record_paths")) {
        if (!mc.at("record_paths").is_boolean()) throw ConfigError("'mc.record_paths' must be true or false");
        s.mc.record_paths = mc.at("record_paths").get<bool>();
    }
    if (!(s.mc.dt > 0.0)) throw ConfigError("'mc.dt' must be > 0");
    if (s.mc.T_max < 0.0) throw ConfigError("'mc.t_max' must be >= 0");
    if (s.mc.n_paths < 1 || s.mc.n_paths > 100'000'000) throw ConfigError("'mc.n_paths' must lie in [1, 1e8]");
    if (s.mc.antithetic && s.mc.n_paths % 2) throw ConfigError("'mc.n_paths' must be even with antithetic pairs");

    const auto& seeds = section("seeds");
    s.first_seed = count(seeds, "seeds", "first", s.first_seed);
    s.n_seeds = count(seeds, "seeds", "count", s.n_seeds);
    if (s.n_seeds < 1 || s.n_seeds > 100000) throw ConfigError("'seeds.count' must lie in [1, 100000]");

    s.tol = number(section("tolerance"), "tolerance", "margin", s.tol);
    if (s.tol < 0.0) throw ConfigError("'tolerance.margin' must be >= 0");
    s.K = number(section("barrier"), "barrier", "K", s.K);
    if (!(s.K > 0.0)) throw ConfigError("'barrier.K' must be > 0");

    if (needs_problem) {
        const auto& pt = section("point");
        if (pt.contains("x0")) {
            s.x0 = vec(pt.at("x0"), "point.x0", s.op.dim());
        } else {
            const auto box = s.dom.bounding_box();
            s.x0 = 0.5 * (box.lo + box.hi);
        }
        if (!s.dom.contains(s.x0)) throw ConfigError("'point.x0' must lie inside the domain");
    }
    return s;
}

void apply_override(Json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(raw);
    } catch (const Json::parse_error&) {
        value = raw;
    }
    Json* node = &j;
    std::stringstream path(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) {
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        Json& next = (*node)[parts[i]];
        if (next.is_null()) next = Json::object();
        if (!next.is_object()) throw ConfigError("override '" + key + "' descends into a non-table value");
        node = &next;
    }
    (*node)[parts.back()] = value;
}

Json load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("malformed config '" + path.string() + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a table");
    for (const auto& o : overrides) apply_override(j, o);
    return j;
}

}  // namespace hopflab
