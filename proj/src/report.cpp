#include "rcache/report.hpp"

#include <ostream>
#include <sstream>

#include "rcache/trace_io.hpp"

namespace rcache {

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_csv_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        os << csv_escape(cells[i]);
    }
    os << '\n';
}

void write_csv_header(std::ostream& os, const std::vector<std::string>& columns) {
    os << CSV_VERSION_LINE << '\n';
    write_csv_line(os, columns);
}

void write_walltime_comment(std::ostream& os, double seconds) {
    os << CSV_WALLTIME_PREFIX << ' ' << fmt_double(seconds) << '\n';
}

std::string csv_cell(int64_t v) { return std::to_string(v); }
std::string csv_cell(double v) { return fmt_double(v); }
std::string csv_cell(const std::optional<int64_t>& v) { return v ? csv_cell(*v) : std::string(); }
std::string csv_cell(const std::optional<double>& v) { return v ? csv_cell(*v) : std::string(); }

const std::vector<std::string>& run_report_columns() {
    static const std::vector<std::string> cols = {
        "algorithm", "trace",  "requests", "distinct_pages", "agents", "k",
        "seed",      "misses", "cost",     "opt",            "ratio"};
    return cols;
}

std::vector<std::string> run_report_cells(const RunReport& r) {
    return {r.algorithm,
            r.trace_id,
            csv_cell(static_cast<int64_t>(r.requests)),
            csv_cell(static_cast<int64_t>(r.distinct_pages)),
            csv_cell(static_cast<int64_t>(r.agents)),
            csv_cell(static_cast<int64_t>(r.k)),
            csv_cell(static_cast<int64_t>(r.seed)),
            csv_cell(r.misses),
            csv_cell(r.cost),
            csv_cell(r.opt),
            csv_cell(r.ratio)};
}

std::string human_run_report(const RunReport& r) {
    std::ostringstream os;
    os << "algorithm:      " << r.algorithm << '\n';
    os << "trace:          " << r.trace_id << '\n';
    os << "requests:       " << r.requests << '\n';
    os << "distinct pages: " << r.distinct_pages << '\n';
    os << "agents:         " << r.agents << '\n';
    os << "k:              " << r.k << '\n';
    if (r.misses) os << "misses:         " << *r.misses << '\n';
    if (r.cost) os << "cost:           " << fmt_double(*r.cost) << '\n';
    if (r.opt) os << "opt:            " << *r.opt << '\n';
    if (r.ratio) os << "ratio:          " << fmt_double(*r.ratio) << '\n';
    os << "wall seconds:   " << fmt_double(r.wall_seconds) << '\n';
    return os.str();
}

}  // namespace rcache
