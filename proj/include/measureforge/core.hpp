#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace measureforge {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;

inline bool all_finite(const CVec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
  }
  return true;
}

// Re <a, b> with the first argument conjugated; symmetric in a, b.
inline double re_inner(const CVec& a, const CVec& b) {
  return a.dot(b).real();
}

// Identifies the interval the atom parameter lives on.  `hi_exclusive`
// marks periodic families where hi is identified with lo.
struct ParameterDomain {
  double lo = 0.0;
  double hi = 1.0;
  bool hi_exclusive = false;

  ParameterDomain() = default;
  ParameterDomain(double lo_, double hi_, bool hi_exclusive_ = false)
      : lo(lo_), hi(hi_), hi_exclusive(hi_exclusive_) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw std::invalid_argument("ParameterDomain: need finite lo < hi");
    }
  }

  double length() const { return hi - lo; }

  bool contains(double t) const {
    if (!std::isfinite(t)) return false;
    return t >= lo && (hi_exclusive ? t < hi : t <= hi);
  }

  bool operator==(const ParameterDomain& o) const {
    return lo == o.lo && hi == o.hi && hi_exclusive == o.hi_exclusive;
  }
};

struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

// Finitely supported nonnegative measure.  Canonical form is maintained by
// construction: atoms sorted by location, duplicate locations merged by
// summing weights, zero-weight atoms dropped.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  explicit DiscreteMeasure(std::vector<Atom> atoms) {
    for (const Atom& a : atoms) {
      if (!std::isfinite(a.location) || !std::isfinite(a.weight)) {
        throw std::invalid_argument("DiscreteMeasure: non-finite atom");
      }
      if (a.weight < 0.0) {
        throw std::invalid_argument("DiscreteMeasure: negative weight " +
                                    std::to_string(a.weight));
      }
    }
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.location < b.location; });
    for (const Atom& a : atoms) {
      if (!atoms_.empty() && atoms_.back().location == a.location) {
        atoms_.back().weight += a.weight;
      } else {
        atoms_.push_back(a);
      }
    }
    std::erase_if(atoms_, [](const Atom& a) { return a.weight == 0.0; });
  }

  static DiscreteMeasure single(double t, double w) { return DiscreteMeasure({{t, w}}); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  double tv_mass() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.weight;
    return s;
  }

  bool operator==(const DiscreteMeasure& o) const {
    if (atoms_.size() != o.atoms_.size()) return false;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (atoms_[i].location != o.atoms_[i].location) return false;
      if (atoms_[i].weight != o.atoms_[i].weight) return false;
    }
    return true;
  }

 private:
  std::vector<Atom> atoms_;
};

inline double tv_mass(const DiscreteMeasure& x) { return x.tv_mass(); }

struct LossEval {
  double value = 0.0;
  CVec gradient;
};

// Smooth data-fit term.  Only the scaled quadratic z -> (sigma/2) ||z||^2 is
// implemented; the interface keeps the curvature constants explicit so other
// strongly smooth losses can slot in.
class LossModel {
 public:
  enum class Kind { scaled_quadratic };

  static LossModel scaled_quadratic(double sigma = 1.0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("LossModel: sigma must be positive and finite");
    }
    LossModel m;
    m.kind_ = Kind::scaled_quadratic;
    m.sigma_ = sigma;
    return m;
  }

  Kind kind() const { return kind_; }
  double sigma() const { return sigma_; }

  // Two-sided curvature constant: both the smoothness of the loss and the
  // strong convexity of its conjugate are controlled by gamma = max(sigma, 1/sigma).
  double gamma() const { return std::max(sigma_, 1.0 / sigma_); }

  // Lipschitz constant of the gradient (tight, unlike gamma).
  double smoothness() const { return sigma_; }

  double value(const CVec& z) const { return 0.5 * sigma_ * z.squaredNorm(); }

  CVec gradient(const CVec& z) const { return sigma_ * z; }

  // Convex conjugate via the real pairing Re<lambda, z>.
  double conjugate(const CVec& lambda) const {
    return lambda.squaredNorm() / (2.0 * sigma_);
  }

  CVec conjugate_gradient(const CVec& lambda) const { return lambda / sigma_; }

 private:
  LossModel() = default;
  Kind kind_ = Kind::scaled_quadratic;
  double sigma_ = 1.0;
};

inline LossEval loss_eval(const LossModel& loss, const CVec& z) {
  if (!all_finite(z)) throw std::invalid_argument("loss_eval: non-finite input");
  return LossEval{loss.value(z), loss.gradient(z)};
}

inline double loss_conjugate(const LossModel& loss, const CVec& lambda) {
  if (!all_finite(lambda)) throw std::invalid_argument("loss_conjugate: non-finite input");
  return loss.conjugate(lambda);
}

}  // namespace measureforge
