#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rcache/core.hpp"

namespace rcache {

/* Trace file format:
 *
 *     # optional comment lines, '#' only at the start of a line
 *     k m k_1 ... k_m
 *     <agent> <local_id>
 *     <agent> <local_id>
 *     ...
 *
 * The first non-comment line carries the cache size, the agent count and the
 * m reserve sizes. Every following non-comment line is one request. Fields
 * are single-space separated with no trailing spaces. The page universe is
 * whatever the trace mentions.
 */
Trace parse_trace(std::istream& in);
Trace parse_trace(const std::string& text);
Trace load_trace(const std::string& path);
void write_trace(std::ostream& out, const Trace& trace);
void save_trace(const std::string& path, const Trace& trace);

/* Step log, one line per request:
 *
 *     t <hit|miss> fetched=<page> evicted=<page|-> phi=<value|->
 */
void write_step_log(std::ostream& out, const std::vector<StepRecord>& steps);

/* Eviction schedule, one line per miss:
 *
 *     t evict=<page> fetch=<page>
 */
void write_schedule(std::ostream& out, const std::vector<ScheduleEntry>& schedule);
std::vector<ScheduleEntry> parse_schedule(std::istream& in);

// Fixed-precision float rendering shared by every log and CSV writer so that
// reruns are byte-identical.
std::string fmt_double(double v);

/* Fractional solver log, one line per request:
 *
 *     t cost=<float> alpha=<float> primal=<float> dual=<float> dualviol=<float>
 */
struct FractionalStepLine {
    int64_t t = 0;
    double cost = 0.0;
    double alpha = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double dualviol = 0.0;
};
void write_fractional_log(std::ostream& out, const std::vector<FractionalStepLine>& lines);

}  // namespace rcache
