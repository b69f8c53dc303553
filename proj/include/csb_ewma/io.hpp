#ifndef CSB_EWMA_IO_HPP_
#define CSB_EWMA_IO_HPP_

// CSV ingestion for live monitoring and CSV emission for all result tables.
//
// Input (long format):   t,stream,value
// Monitor output:        t,c,q,w,r,var_r,lcl,ucl,signal
// ARL tables:            lambda,limit,k,delta,family,arl,sd,se,n_reps,n_censored,cap,seed
// CV table:              delta,mean_arl1,sd_arl1,cv

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "csb_ewma/chart.hpp"
#include "csb_ewma/distributions.hpp"
#include "csb_ewma/optimizer.hpp"
#include "csb_ewma/simulation.hpp"

namespace csb_ewma {

/// Malformed or inconsistent input. `line` is 1-based; 0 when not tied to a line.
class InputError : public std::runtime_error {
 public:
  InputError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct MonitorRecord {
  std::uint64_t t = 0;
  int c = 0;
  std::uint64_t q = 0;
  double w = 0.0;
  double r = 0.0;
  double var_r = 0.0;
  double lcl = 0.0;
  double ucl = 0.0;
  bool signal = false;
};

/// Observations grouped by period. values[t-1][i] belongs to streams[i].
struct StreamTable {
  std::vector<std::string> streams;
  std::vector<std::vector<double>> values;

  int k() const { return static_cast<int>(streams.size()); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end && !s.empty();
}

}  // namespace detail

/// Reads a long-format `t,stream,value` CSV. Periods must start at t = 1 and
/// increase by one; each period must carry exactly one value for every stream
/// named in the first period. k is inferred from the first period and checked
/// against `expected_k` when given.
inline StreamTable read_long_csv(std::istream& in, std::optional<int> expected_k = std::nullopt) {
  StreamTable table;
  std::unordered_map<std::string, std::size_t> index;  // stream label -> column

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  std::uint64_t current_t = 0;
  std::vector<double> row;
  std::vector<char> filled;
  std::vector<std::string> first_labels;  // ordered labels of period 1 while it is open

  auto close_period = [&](std::size_t at_line) {
    if (current_t == 0) return;
    if (current_t == 1) {
      table.streams = first_labels;
      if (expected_k && table.k() != *expected_k)
        throw InputError(at_line, "period 1 has " + std::to_string(table.k()) +
                                      " streams but --streams is " + std::to_string(*expected_k));
    } else {
      for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i])
          throw InputError(at_line, "period " + std::to_string(current_t) +
                                        " is missing stream '" + table.streams[i] + "'");
    }
    table.values.push_back(row);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (detail::trim(view).empty()) continue;
    const auto fields = detail::split_csv_line(view);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "t" || fields[1] != "stream" || fields[2] != "value")
        throw InputError(line_no, "expected header 't,stream,value'");
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) throw InputError(line_no, "expected 3 fields");

    std::uint64_t t = 0;
    if (!detail::parse_number(fields[0], t) || t == 0)
      throw InputError(line_no, "t must be a positive integer, got '" + std::string(fields[0]) + "'");
    const std::string label(fields[1]);
    if (label.empty()) throw InputError(line_no, "empty stream label");
    double value = 0.0;
    if (!detail::parse_number(fields[2], value) || !std::isfinite(value))
      throw InputError(line_no, "value must be a finite number, got '" + std::string(fields[2]) + "'");

    if (t != current_t) {
      if (t < current_t) throw InputError(line_no, "periods must arrive in nondecreasing t");
      if (t != current_t + 1)
        throw InputError(line_no, "period " + std::to_string(current_t + 1) + " is missing (got t=" +
                                      std::to_string(t) + ")");
      close_period(line_no);
      current_t = t;
      if (t > 1) {
        row.assign(table.streams.size(), 0.0);
        filled.assign(table.streams.size(), 0);
      }
    }

    if (current_t == 1) {
      if (index.contains(label))
        throw InputError(line_no, "duplicate stream '" + label + "' in period 1");
      index.emplace(label, first_labels.size());
      first_labels.push_back(label);
      row.push_back(value);
      filled.push_back(1);
    } else {
      const auto it = index.find(label);
      if (it == index.end())
        throw InputError(line_no, "stream '" + label + "' does not appear in period 1");
      if (filled[it->second])
        throw InputError(line_no, "duplicate stream '" + label + "' in period " +
                                      std::to_string(current_t));
      row[it->second] = value;
      filled[it->second] = 1;
    }
  }
  if (!header_seen) throw InputError(line_no, "empty input (missing header 't,stream,value')");
  if (current_t == 0) throw InputError(line_no, "no observations");
  close_period(line_no);
  return table;
}

/// Runs the chart over every period of `table`. params.k is taken from the table.
inline std::vector<MonitorRecord> run_monitor(const StreamTable& table, ChartParams params) {
  params.k = table.k();
  Chart chart(params);
  std::vector<MonitorRecord> out;
  out.reserve(table.values.size());
  for (const auto& period : table.values) {
    const std::uint64_t q_before = chart.state().q;
    const ChartState& s = chart.update(std::span<const double>(period));
    out.push_back(MonitorRecord{s.t, static_cast<int>(s.q - q_before), s.q, s.w, s.r, s.var_r,
                                s.lcl, s.ucl, s.signaled});
  }
  return out;
}

/// 6 significant digits, or round-trip precision when `raw`.
inline std::string format_number(double x, bool raw = false) {
  char buf[64];
  std::snprintf(buf, sizeof buf, raw ? "%.17g" : "%.6g", x);
  return buf;
}

inline void write_monitor_csv(std::ostream& os, std::span<const MonitorRecord> records,
                              bool raw = false) {
  os << "t,c,q,w,r,var_r,lcl,ucl,signal\n";
  for (const auto& m : records) {
    os << m.t << ',' << m.c << ',' << m.q << ',' << format_number(m.w, raw) << ','
       << format_number(m.r, raw) << ',' << format_number(m.var_r, raw) << ','
       << format_number(m.lcl, raw) << ',' << format_number(m.ucl, raw) << ','
       << (m.signal ? 1 : 0) << '\n';
  }
}

inline constexpr std::string_view kArlHeader =
    "lambda,limit,k,delta,family,arl,sd,se,n_reps,n_censored,cap,seed";

inline void write_arl_row(std::ostream& os, double lambda, double limit, int k, double delta,
                          Family family, const RunLengthSummary& s, bool raw = false) {
  os << format_number(lambda, raw) << ',' << format_number(limit, raw) << ',' << k << ','
     << format_number(delta, raw) << ',' << to_string(family) << ',' << format_number(s.arl, raw)
     << ',' << format_number(s.sd, raw) << ',' << format_number(s.se, raw) << ',' << s.n_reps
     << ',' << s.n_censored << ',' << s.cap << ',' << s.seed << '\n';
}

inline void write_grid_csv(std::ostream& os, std::span<const GridSearchRow> rows, int k,
                           bool raw = false) {
  os << "target," << kArlHeader << '\n';
  for (const auto& row : rows) {
    os << format_number(row.target, raw) << ',';
    write_arl_row(os, row.lambda, row.limit_multiplier, k, 0.0, Family::direct, row.summary, raw);
  }
}

inline void write_arl1_csv(std::ostream& os, std::span<const Arl1Cell> cells, int k,
                           bool raw = false) {
  os << kArlHeader << '\n';
  for (const auto& c : cells)
    write_arl_row(os, c.lambda, c.limit_multiplier, k, c.delta, c.family, c.summary, raw);
}

inline void write_cv_csv(std::ostream& os, std::span<const CvRow> rows, bool raw = false) {
  os << "delta,mean_arl1,sd_arl1,cv\n";
  for (const auto& r : rows)
    os << format_number(r.delta, raw) << ',' << format_number(r.mean_arl1, raw) << ','
       << format_number(r.sd_arl1, raw) << ',' << format_number(r.cv, raw) << '\n';
}

}  // namespace csb_ewma

#endif  // CSB_EWMA_IO_HPP_
