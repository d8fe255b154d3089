#pragma once

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "measureforge/analysis.hpp"

namespace measureforge {

using Json = nlohmann::json;

inline Json measure_to_json(const DiscreteMeasure& x) {
  Json atoms = Json::array();
  for (const Atom& a : x.atoms()) atoms.push_back(Json{{"t", a.location}, {"a", a.weight}});
  return Json{{"atoms", std::move(atoms)}};
}

inline DiscreteMeasure measure_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("atoms") || !j["atoms"].is_array()) {
    throw std::invalid_argument("measure_from_json: expected {\"atoms\": [...]}");
  }
  std::vector<Atom> atoms;
  for (const Json& a : j["atoms"]) {
    atoms.push_back({a.at("t").get<double>(), a.at("a").get<double>()});
  }
  return DiscreteMeasure(std::move(atoms));
}

inline Json cvec_to_json(const CVec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(Json::array({v[i].real(), v[i].imag()}));
  }
  return out;
}

inline CVec cvec_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("cvec_from_json: expected an array of [re,im]");
  CVec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& p = j[i];
    if (!p.is_array() || p.size() != 2) {
      throw std::invalid_argument("cvec_from_json: entries must be [re,im] pairs");
    }
    v[static_cast<Eigen::Index>(i)] = Complex(p[0].get<double>(), p[1].get<double>());
  }
  return v;
}

inline Json certificate_to_json(const BoundCertificate& c) {
  return Json{{"kind", bound_kind_name(c.kind)}, {"iteration", c.iteration}, {"lhs", c.lhs},
              {"rhs", c.rhs},                    {"satisfied", c.satisfied}, {"gamma", c.gamma},
              {"radius", c.radius},              {"epsilon", c.epsilon}};
}

inline Json equivalence_to_json(const EquivalenceReport& r) {
  return Json{{"supports_match", r.supports_match},
              {"max_support_discrepancy", r.max_support_discrepancy},
              {"max_value_discrepancy", r.max_value_discrepancy},
              {"compared_supports", r.compared_supports},
              {"compared_values", r.compared_values},
              {"value_tol", r.value_tol},
              {"matched", r.matched}};
}

inline Json reference_to_json(const ReferenceOptima& r) {
  return Json{{"v_primal", r.v_primal},   {"v_dual", r.v_dual},
              {"lambda", cvec_to_json(r.lambda)}, {"alpha", r.alpha},
              {"iterations", r.iterations}, {"converged", r.converged},
              {"fingerprint", r.fingerprint}};
}

inline ReferenceOptima reference_from_json(const Json& j) {
  ReferenceOptima r;
  r.v_primal = j.at("v_primal").get<double>();
  r.v_dual = j.at("v_dual").get<double>();
  r.lambda = cvec_from_json(j.at("lambda"));
  r.alpha = j.at("alpha").get<double>();
  r.iterations = j.at("iterations").get<long>();
  r.converged = j.at("converged").get<bool>();
  r.fingerprint = j.value("fingerprint", std::string());
  return r;
}

inline Json metadata_to_json(const TraceMetadata& m) {
  return Json{{"algorithm", m.algorithm}, {"dictionary", m.dictionary},
              {"m", m.m},                 {"radius", m.radius},
              {"gamma", m.gamma},         {"grid_size", m.grid_size},
              {"grid_spacing", m.grid_spacing}, {"grid_lo", m.grid_lo},
              {"grid_hi", m.grid_hi},     {"eta", m.eta},
              {"lmo_epsilon", m.lmo_epsilon},   {"tv_bound", m.tv_bound},
              {"inner_tol", m.inner_tol}, {"seed", m.seed}};
}

// --- trace CSV -------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader =
    "iter,t_added,primal_value,dual_value,gap,alpha,gradient_norm,violation,wasserstein,"
    "bound13_rhs,bound14_rhs,bound15_lhs,bound15_rhs,bound16_lhs,bound16_rhs,bound17_lhs,"
    "bound17_rhs,wall_ms";

struct TraceCsvRow {
  long iter = 0;
  double t_added = std::numeric_limits<double>::quiet_NaN();
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  double alpha = 0.0;
  double gradient_norm = 0.0;
  double violation = 0.0;
  double wasserstein = std::numeric_limits<double>::quiet_NaN();
  double b13_rhs = std::numeric_limits<double>::quiet_NaN();
  double b14_rhs = std::numeric_limits<double>::quiet_NaN();
  double b15_lhs = std::numeric_limits<double>::quiet_NaN();
  double b15_rhs = std::numeric_limits<double>::quiet_NaN();
  double b16_lhs = std::numeric_limits<double>::quiet_NaN();
  double b16_rhs = std::numeric_limits<double>::quiet_NaN();
  double b17_lhs = std::numeric_limits<double>::quiet_NaN();
  double b17_rhs = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

// A certified lower bound on the optimum: shift alpha up by any positive
// violation to land on a feasible dual point, then take the difference.
inline double duality_gap_estimate(const IterationRecord& rec, double tv_bound) {
  return rec.primal_value - (rec.dual_value - tv_bound * std::max(0.0, rec.violation));
}

inline std::vector<TraceCsvRow> trace_csv_rows(const RunTrace& trace,
                                               const std::vector<BoundCertificate>& certs,
                                               const std::vector<double>& wasserstein) {
  std::map<std::pair<int, int>, const BoundCertificate*> by_key;
  for (const auto& c : certs) by_key[{static_cast<int>(c.kind), c.iteration}] = &c;
  auto lookup = [&](BoundKind k, int l) -> const BoundCertificate* {
    auto it = by_key.find({static_cast<int>(k), l});
    return it == by_key.end() ? nullptr : it->second;
  };

  std::vector<TraceCsvRow> rows;
  rows.reserve(trace.records.size());
  const bool is_cgm = trace.metadata.algorithm == "cgm";
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const IterationRecord& rec = trace.records[i];
    TraceCsvRow row;
    row.iter = rec.iteration;
    row.t_added = rec.t_added;
    row.primal_value = rec.primal_value;
    row.dual_value = rec.dual_value;
    row.gap = duality_gap_estimate(rec, trace.metadata.tv_bound);
    row.alpha = rec.alpha;
    row.gradient_norm = rec.gradient_norm;
    row.violation = rec.violation;
    if (i < wasserstein.size()) row.wasserstein = wasserstein[i];
    if (is_cgm) {
      if (const auto* c = lookup(BoundKind::primal_rate, rec.iteration)) row.b13_rhs = c->rhs;
    } else {
      if (const auto* c = lookup(BoundKind::dual_rate, rec.iteration)) row.b14_rhs = c->rhs;
      if (const auto* c = lookup(BoundKind::lambda_rate, rec.iteration)) {
        row.b15_lhs = c->lhs;
        row.b15_rhs = c->rhs;
      }
      if (const auto* c = lookup(BoundKind::alpha_rate, rec.iteration)) {
        row.b16_lhs = c->lhs;
        row.b16_rhs = c->rhs;
      }
      if (const auto* c = lookup(BoundKind::feasibility, rec.iteration)) {
        row.b17_lhs = c->lhs;
        row.b17_rhs = c->rhs;
      }
    }
    row.wall_ms = rec.wall_seconds * 1000.0;
    rows.push_back(row);
  }
  return rows;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceCsvRow>& rows) {
  os << kTraceCsvHeader << "\n";
  auto g = [](double v) { return detail::fmt_g(v); };
  for (const TraceCsvRow& r : rows) {
    os << r.iter << ',' << g(r.t_added) << ',' << g(r.primal_value) << ',' << g(r.dual_value)
       << ',' << g(r.gap) << ',' << g(r.alpha) << ',' << g(r.gradient_norm) << ','
       << g(r.violation) << ',' << g(r.wasserstein) << ',' << g(r.b13_rhs) << ',' << g(r.b14_rhs)
       << ',' << g(r.b15_lhs) << ',' << g(r.b15_rhs) << ',' << g(r.b16_lhs) << ',' << g(r.b16_rhs)
       << ',' << g(r.b17_lhs) << ',' << g(r.b17_rhs) << ',' << g(r.wall_ms) << "\n";
  }
}

inline std::vector<TraceCsvRow> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_trace_csv: empty stream");
  if (line != kTraceCsvHeader) throw std::runtime_error("read_trace_csv: unexpected header: " + line);
  std::vector<TraceCsvRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> f;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = line.find(',', pos);
      const std::string tok = line.substr(pos, next == std::string::npos ? next : next - pos);
      f.push_back(std::strtod(tok.c_str(), nullptr));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (f.size() != 18) throw std::runtime_error("read_trace_csv: malformed row: " + line);
    TraceCsvRow r;
    r.iter = static_cast<long>(f[0]);
    r.t_added = f[1];
    r.primal_value = f[2];
    r.dual_value = f[3];
    r.gap = f[4];
    r.alpha = f[5];
    r.gradient_norm = f[6];
    r.violation = f[7];
    r.wasserstein = f[8];
    r.b13_rhs = f[9];
    r.b14_rhs = f[10];
    r.b15_lhs = f[11];
    r.b15_rhs = f[12];
    r.b16_lhs = f[13];
    r.b16_rhs = f[14];
    r.b17_lhs = f[15];
    r.b17_rhs = f[16];
    r.wall_ms = f[17];
    rows.push_back(r);
  }
  return rows;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace measureforge
