#pragma once

#include <cstdio>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>

#include "measureforge/core.hpp"

namespace measureforge {

namespace detail {
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}
}  // namespace detail

// Trigonometric atom: entries e^{i pi k t} for k = -(m-1), -(m-1)+2, ..., m-1.
// Odd m keeps every exponent even, so atoms are 1-periodic on [0, 1).
inline CVec fourier_atom(double t, int m) {
  if (m < 1 || m % 2 == 0) {
    throw std::invalid_argument("fourier_atom: m must be odd and positive");
  }
  if (!std::isfinite(t)) throw std::invalid_argument("fourier_atom: non-finite t");
  CVec v(m);
  const double pi = std::numbers::pi;
  for (int j = 0; j < m; ++j) {
    const int k = -(m - 1) + 2 * j;
    v[j] = std::polar(1.0, pi * static_cast<double>(k) * t);
  }
  return v;
}

// Sampled Gaussian bump: entries e^{-c (t - s_j)^2} at sample points s_j.
inline CVec gaussian_atom(double t, const std::vector<double>& samples, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("gaussian_atom: width c must be positive");
  }
  if (samples.empty()) throw std::invalid_argument("gaussian_atom: no sample points");
  if (!std::isfinite(t)) throw std::invalid_argument("gaussian_atom: non-finite t");
  CVec v(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const double d = t - samples[j];
    v[static_cast<Eigen::Index>(j)] = Complex(std::exp(-c * d * d), 0.0);
  }
  return v;
}

enum class AtomFamily { fourier, gaussian, tabulated };

inline const char* family_name(AtomFamily f) {
  switch (f) {
    case AtomFamily::fourier: return "fourier";
    case AtomFamily::gaussian: return "gaussian";
    case AtomFamily::tabulated: return "tabulated";
  }
  return "?";
}

// Parametrized family t -> Phi(t) in C^m over a ParameterDomain.
class AtomDictionary {
 public:
  static AtomDictionary fourier(int m) {
    if (m < 1 || m % 2 == 0) {
      throw std::invalid_argument("AtomDictionary::fourier: m must be odd and positive");
    }
    AtomDictionary d;
    d.family_ = AtomFamily::fourier;
    d.m_ = m;
    d.domain_ = ParameterDomain(0.0, 1.0, /*hi_exclusive=*/true);
    return d;
  }

  static AtomDictionary gaussian(std::vector<double> samples, double width,
                                 ParameterDomain domain = ParameterDomain(0.0, 1.0)) {
    if (!(width > 0.0) || !std::isfinite(width)) {
      throw std::invalid_argument("AtomDictionary::gaussian: width must be positive");
    }
    if (samples.empty()) {
      throw std::invalid_argument("AtomDictionary::gaussian: no sample points");
    }
    for (double s : samples) {
      if (!std::isfinite(s)) throw std::invalid_argument("AtomDictionary::gaussian: non-finite sample");
    }
    AtomDictionary d;
    d.family_ = AtomFamily::gaussian;
    d.m_ = static_cast<int>(samples.size());
    d.samples_ = std::move(samples);
    d.width_ = width;
    d.domain_ = domain;
    return d;
  }

  // Explicit location -> atom table; eval only accepts the listed locations.
  static AtomDictionary tabulated(std::vector<double> locations, Eigen::MatrixXcd atoms,
                                  ParameterDomain domain = ParameterDomain(0.0, 1.0)) {
    if (locations.empty()) throw std::invalid_argument("AtomDictionary::tabulated: empty table");
    if (static_cast<Eigen::Index>(locations.size()) != atoms.cols()) {
      throw std::invalid_argument("AtomDictionary::tabulated: location/column count mismatch");
    }
    if (atoms.rows() < 1) throw std::invalid_argument("AtomDictionary::tabulated: empty atoms");
    std::vector<std::size_t> order(locations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return locations[a] < locations[b]; });
    AtomDictionary d;
    d.family_ = AtomFamily::tabulated;
    d.m_ = static_cast<int>(atoms.rows());
    d.domain_ = domain;
    d.samples_.resize(locations.size());
    d.table_ = Eigen::MatrixXcd(atoms.rows(), atoms.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
      const double t = locations[order[i]];
      if (!std::isfinite(t)) throw std::invalid_argument("AtomDictionary::tabulated: non-finite location");
      if (!domain.contains(t)) throw std::invalid_argument("AtomDictionary::tabulated: location outside domain");
      if (i > 0 && d.samples_[i - 1] == t) {
        throw std::invalid_argument("AtomDictionary::tabulated: duplicate location");
      }
      d.samples_[i] = t;
      d.table_.col(static_cast<Eigen::Index>(i)) = atoms.col(static_cast<Eigen::Index>(order[i]));
      if (!all_finite(d.table_.col(static_cast<Eigen::Index>(i)))) {
        throw std::invalid_argument("AtomDictionary::tabulated: non-finite atom entry");
      }
    }
    return d;
  }

  AtomFamily family() const { return family_; }
  int output_dim() const { return m_; }
  const ParameterDomain& domain() const { return domain_; }
  const std::vector<double>& sample_points() const { return samples_; }
  double width() const { return width_; }

  // Locations a tabulated dictionary is defined on (also used as its scan grid).
  const std::vector<double>& tabulated_locations() const {
    if (family_ != AtomFamily::tabulated) {
      throw std::logic_error("tabulated_locations: not a tabulated dictionary");
    }
    return samples_;
  }

  CVec eval(double t) const {
    if (!domain_.contains(t)) {
      throw std::domain_error("AtomDictionary::eval: t=" + detail::fmt_g(t) + " outside domain");
    }
    switch (family_) {
      case AtomFamily::fourier:
        return fourier_atom(t, m_);
      case AtomFamily::gaussian:
        return gaussian_atom(t, samples_, width_);
      case AtomFamily::tabulated: {
        auto it = std::lower_bound(samples_.begin(), samples_.end(), t - loc_tol(t));
        if (it != samples_.end() && std::abs(*it - t) <= loc_tol(t)) {
          const auto idx = static_cast<Eigen::Index>(it - samples_.begin());
          return table_.col(idx);
        }
        throw std::domain_error("AtomDictionary::eval: t=" + detail::fmt_g(t) +
                                " is not a tabulated location");
      }
    }
    throw std::logic_error("AtomDictionary::eval: bad family");
  }

  std::string description() const {
    switch (family_) {
      case AtomFamily::fourier:
        return "fourier(m=" + std::to_string(m_) + ")";
      case AtomFamily::gaussian:
        return "gaussian(c=" + detail::fmt_g(width_) + ",n=" + std::to_string(m_) +
               ",lo=" + detail::fmt_g(samples_.front()) + ",hi=" + detail::fmt_g(samples_.back()) + ")";
      case AtomFamily::tabulated:
        return "tabulated(m=" + std::to_string(m_) + ",k=" + std::to_string(samples_.size()) + ")";
    }
    return "?";
  }

 private:
  static double loc_tol(double t) { return 1e-12 * (1.0 + std::abs(t)); }

  AtomFamily family_ = AtomFamily::fourier;
  int m_ = 1;
  ParameterDomain domain_;
  std::vector<double> samples_;  // gaussian sample points / tabulated locations
  double width_ = 0.0;
  Eigen::MatrixXcd table_;
};

// Finite scan set inside a dictionary domain; strictly increasing, n >= 2.
struct Grid {
  std::vector<double> points;
  double nominal_spacing = 0.0;

  Grid() = default;

  static Grid from_points(std::vector<double> pts) {
    if (pts.size() < 2) throw std::invalid_argument("Grid: need at least two points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!std::isfinite(pts[i])) throw std::invalid_argument("Grid: non-finite point");
      if (i > 0 && !(pts[i] > pts[i - 1])) {
        throw std::invalid_argument("Grid: points must be strictly increasing");
      }
    }
    Grid g;
    g.nominal_spacing = (pts.back() - pts.front()) / static_cast<double>(pts.size() - 1);
    g.points = std::move(pts);
    return g;
  }

  // j * len / n, j = 0..n-1: half-open uniform grid (periodic families).
  static Grid uniform_half_open(const ParameterDomain& dom, int n) {
    if (n < 2) throw std::invalid_argument("Grid: need n >= 2");
    std::vector<double> pts(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      pts[static_cast<std::size_t>(j)] = dom.lo + dom.length() * (static_cast<double>(j) / n);
    }
    Grid g;
    g.points = std::move(pts);
    g.nominal_spacing = dom.length() / n;
    return g;
  }

  // j * len / (n-1), j = 0..n-1: closed uniform grid including both endpoints.
  static Grid uniform_closed(const ParameterDomain& dom, int n) {
    if (n < 2) throw std::invalid_argument("Grid: need n >= 2");
    std::vector<double> pts(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      pts[static_cast<std::size_t>(j)] = dom.lo + dom.length() * (static_cast<double>(j) / (n - 1));
    }
    pts.back() = dom.hi;
    Grid g;
    g.points = std::move(pts);
    g.nominal_spacing = dom.length() / (n - 1);
    return g;
  }

  // Convention per family: half-open for periodic trigonometric atoms, closed
  // for gaussians, the table itself for tabulated dictionaries.
  static Grid uniform_for(const AtomDictionary& dict, int n) {
    switch (dict.family()) {
      case AtomFamily::fourier: return uniform_half_open(dict.domain(), n);
      case AtomFamily::gaussian: return uniform_closed(dict.domain(), n);
      case AtomFamily::tabulated: return from_points(dict.tabulated_locations());
    }
    throw std::logic_error("Grid::uniform_for: bad family");
  }

  std::size_t size() const { return points.size(); }
};

inline void validate_grid(const AtomDictionary& dict, const Grid& grid) {
  if (grid.points.size() < 2) throw std::invalid_argument("grid: need at least two points");
  for (double t : grid.points) {
    if (!dict.domain().contains(t)) {
      throw std::invalid_argument("grid: point " + detail::fmt_g(t) + " outside dictionary domain");
    }
  }
}

// max ||Phi(t)|| over the grid.  Trigonometric atoms have constant norm
// sqrt(m), so that case is exact rather than grid-dependent.
inline double dict_radius(const AtomDictionary& dict, const Grid& grid) {
  if (dict.family() == AtomFamily::fourier) {
    return std::sqrt(static_cast<double>(dict.output_dim()));
  }
  validate_grid(dict, grid);
  double r = 0.0;
  for (double t : grid.points) r = std::max(r, dict.eval(t).norm());
  return r;
}

// True when the m atoms at the given points are linearly independent
// (smallest singular value above 1e-10 of the largest).
inline bool chebyshev_check(const AtomDictionary& dict, const std::vector<double>& points) {
  const int m = dict.output_dim();
  if (static_cast<int>(points.size()) != m) {
    throw std::invalid_argument("chebyshev_check: need exactly m points");
  }
  std::vector<double> sorted = points;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) {
      throw std::invalid_argument("chebyshev_check: repeated point " + detail::fmt_g(sorted[i]));
    }
  }
  Eigen::MatrixXcd M(m, m);
  for (int j = 0; j < m; ++j) M.col(j) = dict.eval(points[static_cast<std::size_t>(j)]);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& sv = svd.singularValues();
  return sv[sv.size() - 1] > 1e-10 * sv[0];
}

// sum_i a_i Phi(t_i); the zero vector for the empty measure.
inline CVec synthesize(const AtomDictionary& dict, const DiscreteMeasure& x) {
  CVec out = CVec::Zero(dict.output_dim());
  for (const Atom& a : x.atoms()) out += a.weight * dict.eval(a.location);
  return out;
}

// Observation vector plus everything needed to score a candidate measure.
struct ProblemInstance {
  CVec y;
  AtomDictionary dict;
  LossModel loss = LossModel::scaled_quadratic(1.0);
  double tv_bound = 1.0;

  void validate() const {
    if (y.size() != dict.output_dim()) {
      throw std::invalid_argument("ProblemInstance: y size does not match dictionary output dim");
    }
    if (!all_finite(y)) throw std::invalid_argument("ProblemInstance: non-finite y");
    if (!(tv_bound > 0.0) || !std::isfinite(tv_bound)) {
      throw std::invalid_argument("ProblemInstance: tv_bound must be positive");
    }
  }
};

}  // namespace measureforge
