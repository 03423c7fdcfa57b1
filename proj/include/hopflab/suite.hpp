#pragma once

#include "hopflab/config.hpp"
#include "hopflab/report.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hopflab {

/// One row of the acceptance matrix.
struct RowResult {
    int id = 0;
    std::string title;
    bool pass = false;
    double seconds = 0.0;     ///< wall time; kept out of report.jsonl
    double time_limit = 0.0;  ///< seconds
    std::string detail;
    std::vector<ReportRecord> records;
    std::vector<CsvTable> tables;
};

enum class SuiteScale { Full, Smoke };

std::vector<std::string> suite_names();
/// Rows of a named suite; throws ConfigError for unknown names.
std::vector<int> suite_rows(const std::string& name);
RowResult run_row(int id, SuiteScale scale = SuiteScale::Full);

struct SuiteResult {
    std::string name;
    std::vector<RowResult> rows;
    bool pass() const;
};

SuiteResult run_suite(const std::string& name, const std::function<void(const RowResult&)>& progress = {});

/// "criterion N PASS|FAIL (t s, limit L s) title: detail". Without timing the
/// verdict ignores the limit and the parenthesis is dropped.
std::string criterion_line(const RowResult& row, bool timing = true);

/// Random case pipeline for one checker over seeds first..first+count-1.
/// Names are the task suffixes: weak-max, strong-max, bony, hopf, qhl-IA, qhl-IB,
/// qhl-IIA, qhl-IIB, delta-bound, weak-harnack, harnack-corollary, mc-vs-grid.
/// `tol` is the margin tolerance of the inequality checkers (weak-max, bony, hopf, qhl-*).
std::vector<ReportRecord> run_checker(const std::string& name, const OperatorSpec& op, const DomainSpec& dom,
                                      double h, std::uint64_t first, std::size_t count, const PathConfig& mc,
                                      const Vec& x0, const std::string& group, double tol = 1e-9);

/// Hand-built violating inputs; each record is ExpectedFail when its checker
/// failed and Fail when it did not.
std::vector<ReportRecord> negative_controls();

struct TaskOutput {
    std::vector<ReportRecord> records;
    std::vector<CsvTable> tables;
    std::string summary_extra;
    std::vector<RowResult> rows;  ///< suite task only
};

TaskOutput run_task(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

/// 0 when no record failed, 1 otherwise.
int exit_status(const std::vector<ReportRecord>& records);

}  // namespace hopflab
