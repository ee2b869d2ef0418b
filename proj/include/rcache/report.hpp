#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rcache {

// CSV emission shared by the command-line tool and the acceptance gate.
//
// Every CSV stream starts with a version comment line followed by a plain
// column-header line. Wall-clock time is never a data cell: it is appended
// as a trailing "# walltime <seconds>" comment so that byte comparison of
// two same-seed runs only has to drop lines starting with "# walltime".
inline constexpr const char* CSV_VERSION_LINE = "# rcache-csv v1";
inline constexpr const char* CSV_WALLTIME_PREFIX = "# walltime";

// RFC-4180-style cell quoting (only when the cell needs it).
std::string csv_escape(const std::string& cell);
void write_csv_line(std::ostream& os, const std::vector<std::string>& cells);
// "# rcache-csv v1" plus the header line for the given columns.
void write_csv_header(std::ostream& os, const std::vector<std::string>& columns);
void write_walltime_comment(std::ostream& os, double seconds);

// Cell rendering: integers exact, doubles through the shared fixed-precision
// formatter, empty optionals become empty cells.
std::string csv_cell(int64_t v);
std::string csv_cell(double v);
std::string csv_cell(const std::optional<int64_t>& v);
std::string csv_cell(const std::optional<double>& v);

// Result of one algorithm run over one trace, as reported by the `run`
// command. Integral algorithms fill `misses`; the fractional solver fills
// `cost`; the rounding scheme fills both (sampled misses plus expected
// eviction cost). `opt` and `ratio` are present only when the exact optimum
// was computed; ratio = (cost if present, else misses) / opt, with 1 for the
// empty trace where both sides are zero.
struct RunReport {
    std::string algorithm;
    std::string trace_id;
    int64_t requests = 0;
    int distinct_pages = 0;
    int agents = 0;
    int k = 0;
    uint64_t seed = 0;
    std::optional<int64_t> misses;
    std::optional<double> cost;
    std::optional<int64_t> opt;
    std::optional<double> ratio;
    double wall_seconds = 0.0;  // stdout + walltime comment only, never a cell
};

const std::vector<std::string>& run_report_columns();
std::vector<std::string> run_report_cells(const RunReport& r);
// Multi-line "key: value" rendering for stdout.
std::string human_run_report(const RunReport& r);

}  // namespace rcache
