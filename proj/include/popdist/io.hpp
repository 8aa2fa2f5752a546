#pragma once

// Text formats.
//
//   observations    t=<int>            then one count X_i per line
//   raw trials      t=<int>,trials     then one string of t 0/1 characters per line
//   distribution    location,mass      then one atom per line
//
// Numbers are written with 12 significant digits through std::to_chars, which
// ignores the global locale. Blank lines and trailing carriage returns are
// tolerated on input.

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "popdist/core.hpp"
#include "popdist/error.hpp"
#include "popdist/estimators.hpp"
#include "popdist/metrics.hpp"
#include "popdist/polyapprox.hpp"
#include "popdist/simulate.hpp"

namespace popdist::io {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

/// Rounds every floating value in `j` to 12 significant digits, in place.
inline void round_json(nlohmann::json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v)) {
      const std::string text = format_number(v);
      double r = v;
      std::from_chars(text.data(), text.data() + text.size(), r);
      j = r;
    }
  } else if (j.is_structured()) {
    for (auto& item : j) round_json(item);
  }
}

struct ObservationInput {
  ObservationSet counts;
  std::optional<TrialMatrix> trials;  // present only for raw-trial files
};

namespace detail {

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

[[noreturn]] inline void fail(const std::string& source, int line, const std::string& msg) {
  throw InputError(source + ":" + std::to_string(line) + ": " + msg);
}

inline bool parse_int(const std::string& s, int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_real(const std::string& s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline ObservationInput parse_observations(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (!line.empty()) break;
  }
  if (line.empty()) detail::fail(source, line_no, "empty file; expected header 't=<int>'");
  bool raw = false;
  std::string head = line;
  if (const auto comma = line.find(','); comma != std::string::npos) {
    if (detail::trim(line.substr(comma + 1)) != "trials") {
      detail::fail(source, line_no, "header must be 't=<int>' or 't=<int>,trials'");
    }
    raw = true;
    head = detail::trim(line.substr(0, comma));
  }
  int t = 0;
  if (head.rfind("t=", 0) != 0 || !detail::parse_int(head.substr(2), t) || t < 1) {
    detail::fail(source, line_no, "header must be 't=<int>' with t >= 1, got '" + line + "'");
  }

  std::vector<int> counts;
  std::vector<std::uint8_t> bits;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (raw) {
      if (static_cast<int>(line.size()) != t) {
        detail::fail(source, line_no, "expected " + std::to_string(t) + " trial outcomes, got " +
                                          std::to_string(line.size()));
      }
      int sum = 0;
      for (char ch : line) {
        if (ch != '0' && ch != '1') detail::fail(source, line_no, "trial outcomes must be 0 or 1");
        bits.push_back(ch == '1' ? 1 : 0);
        sum += ch == '1';
      }
      counts.push_back(sum);
    } else {
      int x = 0;
      if (!detail::parse_int(line, x)) detail::fail(source, line_no, "not an integer: '" + line + "'");
      if (x < 0 || x > t) {
        detail::fail(source, line_no, "count " + line + " outside [0, " + std::to_string(t) + "]");
      }
      counts.push_back(x);
    }
  }
  if (counts.empty()) detail::fail(source, line_no, "no observations after the header");
  ObservationInput out{ObservationSet(t, counts), std::nullopt};
  if (raw) out.trials.emplace(t, counts.size(), std::move(bits));
  return out;
}

inline ObservationInput read_observations(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_observations(in, path);
}

inline void write_observations(std::ostream& out, const ObservationSet& obs) {
  out << "t=" << obs.t() << '\n';
  for (int x : obs.counts()) out << x << '\n';
}

inline void write_trials(std::ostream& out, const TrialMatrix& trials) {
  out << "t=" << trials.t() << ",trials\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    for (std::uint8_t b : trials.row(i)) out << (b ? '1' : '0');
    out << '\n';
  }
}

inline void write_distribution(std::ostream& out, const AtomicDistribution& d) {
  out << "location,mass\n";
  for (const Atom& a : d.atoms()) out << format_number(a.location) << ',' << format_number(a.mass) << '\n';
}

inline AtomicDistribution parse_distribution(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  int line_no = 0;
  bool header = false;
  std::vector<Atom> atoms;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "location,mass") detail::fail(source, line_no, "header must be 'location,mass'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    Atom a;
    if (comma == std::string::npos || !detail::parse_real(detail::trim(line.substr(0, comma)), a.location) ||
        !detail::parse_real(detail::trim(line.substr(comma + 1)), a.mass)) {
      detail::fail(source, line_no, "expected '<location>,<mass>', got '" + line + "'");
    }
    if (a.location < 0.0 || a.location > 1.0 || a.mass < 0.0) {
      detail::fail(source, line_no, "atom must have location in [0,1] and nonnegative mass");
    }
    atoms.push_back(a);
  }
  if (!header) detail::fail(source, line_no, "empty file; expected header 'location,mass'");
  if (atoms.empty()) detail::fail(source, line_no, "no atoms after the header");
  // 12-digit masses need not sum to 1 exactly
  double total = 0.0;
  for (const Atom& a : atoms) total += a.mass;
  if (std::abs(total - 1.0) > 1e-6) detail::fail(source, line_no, "masses sum to " + format_number(total) + ", not 1");
  return AtomicDistribution::normalize(std::move(atoms));
}

inline AtomicDistribution read_distribution(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_distribution(in, path);
}

/// Estimated against observed unbiased moments, orders 1..t.
inline void write_moment_diagnostic(std::ostream& out, const AtomicDistribution& est, const ObservationSet& obs) {
  const MomentVector observed = unbiased_moments(obs, obs.t());
  const MomentVector estimated = moments(est, obs.t());
  out << "k,estimated,observed,difference\n";
  for (int k = 1; k <= obs.t(); ++k) {
    out << k << ',' << format_number(estimated[k]) << ',' << format_number(observed[k]) << ','
        << format_number(estimated[k] - observed[k]) << '\n';
  }
}

/// runtime_ms is written as 0 unless `timing`, keeping repeated runs byte-identical.
inline void write_results(std::ostream& out, const ScenarioResult& r, bool timing = false) {
  out << "scenario_id,estimator,N,t,rep,w1,runtime_ms\n";
  for (const ResultRow& row : r.rows) {
    out << row.scenario_id << ',' << to_string(row.estimator) << ',' << row.n << ',' << row.t << ',' << row.rep << ','
        << format_number(row.w1) << ',' << format_number(timing ? row.runtime_ms : 0.0) << '\n';
  }
}

inline void write_summary(std::ostream& out, const std::string& scenario_id, const ScenarioResult& r) {
  out << "scenario_id,estimator,succeeded,failed,mean_w1,stderr_w1\n";
  for (const SummaryRow& s : r.summary) {
    out << scenario_id << ',' << to_string(s.estimator) << ',' << s.succeeded << ',' << s.failed << ','
        << format_number(s.mean_w1) << ',' << format_number(s.stderr_w1) << '\n';
  }
}

inline void write_coeff_bounds(std::ostream& out, const std::vector<CoeffBoundReport>& reports) {
  out << "t,m,max_abs_coeff,lemma4_bound,conjecture_bound,lemma4_ok,conjecture_ok\n";
  for (const CoeffBoundReport& rep : reports) {
    for (const CoeffBoundRow& row : rep.rows) {
      if (row.m < 1) continue;
      out << row.t << ',' << row.m << ',' << format_number(row.max_abs_coeff) << ','
          << format_number(row.lemma4_bound) << ',' << format_number(row.conjecture_bound) << ','
          << (row.lemma4_ok && row.l2_ok ? "true" : "false") << ',' << (row.conjecture_ok ? "true" : "false")
          << '\n';
    }
  }
}

inline void write_kravchuk(std::ostream& out, const std::vector<KravchukReport>& reports) {
  out << "t,k,sum_abs,bound,holds,identity_ok\n";
  for (const KravchukReport& r : reports) {
    out << r.t << ',' << r.k << ',' << format_number(r.sum_abs) << ',' << format_number(r.bound) << ','
        << (r.holds ? "true" : "false") << ',' << (r.identity_ok ? "true" : "false") << '\n';
  }
}

}  // namespace popdist::io
