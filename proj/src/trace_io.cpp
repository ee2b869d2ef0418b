#include "rcache/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rcache {

namespace {

// Pulls the next line that is neither blank nor a '#' comment.
bool next_content_line(std::istream& in, std::string& line, int64_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        return true;
    }
    return false;
}

[[noreturn]] void parse_fail(int64_t lineno, const std::string& what) {
    throw std::runtime_error("trace line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

Trace parse_trace(std::istream& in) {
    Trace trace;
    std::string line;
    int64_t lineno = 0;
    if (!next_content_line(in, line, lineno))
        throw std::runtime_error("trace is empty: missing header line");
    {
        std::istringstream header(line);
        int m = 0;
        if (!(header >> trace.config.k >> m)) parse_fail(lineno, "expected 'k m k_1 ... k_m'");
        if (m < 0) parse_fail(lineno, "agent count is negative");
        trace.config.reserves.resize(m);
        for (int i = 0; i < m; ++i) {
            if (!(header >> trace.config.reserves[i]))
                parse_fail(lineno, "expected " + std::to_string(m) + " reserve sizes");
        }
        std::string extra;
        if (header >> extra) parse_fail(lineno, "unexpected trailing field '" + extra + "'");
    }
    while (next_content_line(in, line, lineno)) {
        std::istringstream req(line);
        Page p;
        if (!(req >> p.agent >> p.local_id)) parse_fail(lineno, "expected '<agent> <local_id>'");
        std::string extra;
        if (req >> extra) parse_fail(lineno, "unexpected trailing field '" + extra + "'");
        trace.requests.push_back(p);
    }
    trace.validate();
    return trace;
}

Trace parse_trace(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
    out << trace.config.k << ' ' << trace.config.agent_count();
    for (int r : trace.config.reserves) out << ' ' << r;
    out << '\n';
    for (const Page& p : trace.requests) {
        out << p.agent << ' ' << p.local_id << '\n';
    }
}

void save_trace(const std::string& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    write_trace(out, trace);
}

void write_step_log(std::ostream& out, const std::vector<StepRecord>& steps) {
    for (const StepRecord& s : steps) {
        out << s.t << ' ' << (s.hit ? "hit" : "miss") << " fetched=" << to_string(s.fetched)
            << " evicted=" << (s.evicted ? to_string(*s.evicted) : "-")
            << " phi=" << (s.phi ? fmt_double(*s.phi) : "-") << '\n';
    }
}

void write_schedule(std::ostream& out, const std::vector<ScheduleEntry>& schedule) {
    for (const ScheduleEntry& e : schedule) {
        out << e.t << " evict=" << to_string(e.evict) << " fetch=" << to_string(e.fetch) << '\n';
    }
}

std::vector<ScheduleEntry> parse_schedule(std::istream& in) {
    std::vector<ScheduleEntry> schedule;
    std::string line;
    int64_t lineno = 0;
    while (next_content_line(in, line, lineno)) {
        std::istringstream row(line);
        ScheduleEntry e;
        std::string evict_tok, fetch_tok;
        if (!(row >> e.t >> evict_tok >> fetch_tok))
            parse_fail(lineno, "expected 't evict=<page> fetch=<page>'");
        if (evict_tok.rfind("evict=", 0) != 0 || fetch_tok.rfind("fetch=", 0) != 0)
            parse_fail(lineno, "expected 'evict=' and 'fetch=' fields");
        auto ev = parse_page(evict_tok.substr(6));
        auto fe = parse_page(fetch_tok.substr(6));
        if (!ev || !fe) parse_fail(lineno, "bad page token");
        e.evict = *ev;
        e.fetch = *fe;
        schedule.push_back(e);
    }
    return schedule;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_fractional_log(std::ostream& out, const std::vector<FractionalStepLine>& lines) {
    for (const FractionalStepLine& l : lines) {
        out << l.t << " cost=" << fmt_double(l.cost) << " alpha=" << fmt_double(l.alpha)
            << " primal=" << fmt_double(l.primal) << " dual=" << fmt_double(l.dual)
            << " dualviol=" << fmt_double(l.dualviol) << '\n';
    }
}

}  // namespace rcache
