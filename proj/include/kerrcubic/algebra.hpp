// Copyright 2026 The kerrcubic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Normal-ordered single-mode polynomials with coefficients that are polynomials in a
// real displacement symbol alpha. Keeping alpha symbolic lets the large counter-terms of the
// driven Kerr Hamiltonian cancel algebraically instead of in floating point.

#include <algorithm>
#include <initializer_list>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kerrcubic/errors.hpp"
#include "kerrcubic/linalg.hpp"
#include "kerrcubic/operator_core.hpp"

namespace kerrcubic {

namespace detail {

// Relative size below which an accumulated sum is treated as an exact cancellation.
inline constexpr double kCancelTolerance = 64.0 * 2.220446049250313e-16;

// Sum of complex terms that remembers how large the individual terms were.
struct CancellingSum {
  Complex sum{0.0};
  double magnitude = 0.0;

  void add(Complex v) {
    sum += v;
    magnitude += std::abs(v);
  }
  Complex value() const { return std::abs(sum) <= kCancelTolerance * magnitude ? Complex(0.0) : sum; }
};

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// n! / (n-k)!
inline double falling(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= n - i;
  return r;
}

}  // namespace detail

/// Polynomial in the displacement symbol alpha; coeffs[k] multiplies alpha^k.
class AlphaPoly {
 public:
  AlphaPoly() = default;
  AlphaPoly(Complex constant) : coeffs_{constant} { prune(); }  // NOLINT(google-explicit-constructor)
  AlphaPoly(double constant) : AlphaPoly(Complex(constant)) {}  // NOLINT(google-explicit-constructor)
  explicit AlphaPoly(std::vector<Complex> coeffs) : coeffs_(std::move(coeffs)) { prune(); }
  AlphaPoly(std::initializer_list<Complex> coeffs) : coeffs_(coeffs) { prune(); }

  static AlphaPoly monomial(int power, Complex coeff = 1.0) {
    require(power >= 0, "AlphaPoly::monomial: negative power");
    std::vector<Complex> c(static_cast<std::size_t>(power) + 1, Complex(0.0));
    c.back() = coeff;
    return AlphaPoly(std::move(c));
  }

  /// -1 for the zero polynomial.
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  bool is_zero() const { return coeffs_.empty(); }
  bool is_constant() const { return coeffs_.size() <= 1; }
  const std::vector<Complex>& coefficients() const { return coeffs_; }
  Complex coeff(int power) const {
    return power >= 0 && power < static_cast<int>(coeffs_.size()) ? coeffs_[static_cast<std::size_t>(power)]
                                                                    : Complex(0.0);
  }

  Complex evaluate(double alpha) const {
    Complex r{0.0};
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) r = r * alpha + *it;
    return r;
  }

  /// Complex conjugate for real alpha.
  AlphaPoly conj() const {
    std::vector<Complex> c(coeffs_);
    for (auto& v : c) v = std::conj(v);
    return AlphaPoly(std::move(c));
  }

  friend AlphaPoly operator+(const AlphaPoly& a, const AlphaPoly& b) { return combine(a, b, 1.0); }
  friend AlphaPoly operator-(const AlphaPoly& a, const AlphaPoly& b) { return combine(a, b, -1.0); }
  friend AlphaPoly operator-(const AlphaPoly& a) { return AlphaPoly() - a; }
  friend AlphaPoly operator*(const AlphaPoly& a, const AlphaPoly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<detail::CancellingSum> acc(a.coeffs_.size() + b.coeffs_.size() - 1);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) acc[i + j].add(a.coeffs_[i] * b.coeffs_[j]);
    return from_sums(acc);
  }
  friend AlphaPoly operator*(Complex s, const AlphaPoly& a) {
    std::vector<Complex> c(a.coeffs_);
    for (auto& v : c) v *= s;
    return AlphaPoly(std::move(c));
  }
  friend AlphaPoly operator*(double s, const AlphaPoly& a) { return Complex(s) * a; }
  friend bool operator==(const AlphaPoly& a, const AlphaPoly& b) { return a.coeffs_ == b.coeffs_; }

  static AlphaPoly from_sums(const std::vector<detail::CancellingSum>& sums) {
    std::vector<Complex> c(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) c[i] = sums[i].value();
    return AlphaPoly(std::move(c));
  }

 private:
  static AlphaPoly combine(const AlphaPoly& a, const AlphaPoly& b, double sign) {
    std::vector<detail::CancellingSum> acc(std::max(a.coeffs_.size(), b.coeffs_.size()));
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) acc[i].add(a.coeffs_[i]);
    for (std::size_t i = 0; i < b.coeffs_.size(); ++i) acc[i].add(sign * b.coeffs_[i]);
    return from_sums(acc);
  }

  void prune() {
    while (!coeffs_.empty() && coeffs_.back() == Complex(0.0)) coeffs_.pop_back();
  }

  std::vector<Complex> coeffs_;
};

/// (power of a^dagger, power of a).
using Monomial = std::pair<int, int>;

namespace detail {

// Accumulates coefficient contributions per monomial and alpha power, then prunes exact
// cancellations.
template <typename Key>
class PolyAccumulator {
 public:
  void add(const Key& key, const AlphaPoly& coeff, Complex scale = 1.0) {
    auto& slots = sums_[key];
    const auto& c = coeff.coefficients();
    if (slots.size() < c.size()) slots.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) slots[i].add(scale * c[i]);
  }

  std::map<Key, AlphaPoly> finish() const {
    std::map<Key, AlphaPoly> out;
    for (const auto& [key, slots] : sums_) {
      AlphaPoly p = AlphaPoly::from_sums(slots);
      if (!p.is_zero()) out.emplace(key, std::move(p));
    }
    return out;
  }

 private:
  std::map<Key, std::vector<CancellingSum>> sums_;
};

}  // namespace detail

/// Sum of c_{m,n}(alpha) (a^dagger)^m a^n.
class BosonPolynomial {
 public:
  using Terms = std::map<Monomial, AlphaPoly>;

  BosonPolynomial() = default;
  explicit BosonPolynomial(Terms terms) : terms_(std::move(terms)) {
    std::erase_if(terms_, [](const auto& kv) { return kv.second.is_zero(); });
  }

  static BosonPolynomial constant(const AlphaPoly& c) { return monomial(0, 0, c); }
  static BosonPolynomial monomial(int m, int n, const AlphaPoly& c = AlphaPoly(1.0)) {
    require(m >= 0 && n >= 0, "BosonPolynomial: negative monomial power");
    return BosonPolynomial(Terms{{{m, n}, c}});
  }
  static BosonPolynomial a() { return monomial(0, 1); }
  static BosonPolynomial adag() { return monomial(1, 0); }
  /// x = (a + a^dagger)/sqrt(2).
  static BosonPolynomial x() { return (1.0 / std::numbers::sqrt2) * (a() + adag()); }
  /// p = (a - a^dagger)/(i sqrt(2)).
  static BosonPolynomial p() { return Complex(0.0, -1.0 / std::numbers::sqrt2) * (a() - adag()); }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  AlphaPoly coefficient(int m, int n) const {
    auto it = terms_.find({m, n});
    return it == terms_.end() ? AlphaPoly() : it->second;
  }

  /// Largest m + n.
  int degree() const {
    int d = -1;
    for (const auto& [k, c] : terms_) d = std::max(d, k.first + k.second);
    return d;
  }
  int alpha_degree() const {
    int d = -1;
    for (const auto& [k, c] : terms_) d = std::max(d, c.degree());
    return d;
  }

  BosonPolynomial adjoint() const {
    Terms t;
    for (const auto& [k, c] : terms_) t.emplace(Monomial{k.second, k.first}, c.conj());
    return BosonPolynomial(std::move(t));
  }

  /// Substitute a numeric alpha; the result has constant coefficients.
  BosonPolynomial evaluate(double alpha) const {
    Terms t;
    for (const auto& [k, c] : terms_) t.emplace(k, AlphaPoly(c.evaluate(alpha)));
    return BosonPolynomial(std::move(t));
  }

  BosonPolynomial drop_constant() const {
    Terms t(terms_);
    t.erase({0, 0});
    return BosonPolynomial(std::move(t));
  }

  /// coefficient(m,n)(alpha) == conj(coefficient(n,m)(alpha)) up to tol relative to the largest one.
  bool is_hermitian_at(double alpha, double rel_tol = 1e-12) const {
    double scale = 0.0;
    for (const auto& [k, c] : terms_) scale = std::max(scale, std::abs(c.evaluate(alpha)));
    for (const auto& [k, c] : terms_) {
      const Complex mine = c.evaluate(alpha);
      const Complex partner = coefficient(k.second, k.first).evaluate(alpha);
      if (std::abs(mine - std::conj(partner)) > rel_tol * scale) return false;
    }
    return true;
  }

  friend BosonPolynomial operator+(const BosonPolynomial& p, const BosonPolynomial& q) {
    detail::PolyAccumulator<Monomial> acc;
    for (const auto& [k, c] : p.terms_) acc.add(k, c);
    for (const auto& [k, c] : q.terms_) acc.add(k, c);
    return BosonPolynomial(acc.finish());
  }
  friend BosonPolynomial operator-(const BosonPolynomial& p, const BosonPolynomial& q) {
    return p + Complex(-1.0) * q;
  }
  friend BosonPolynomial operator*(const AlphaPoly& s, const BosonPolynomial& p) {
    Terms t;
    for (const auto& [k, c] : p.terms_) t.emplace(k, s * c);
    return BosonPolynomial(std::move(t));
  }
  friend BosonPolynomial operator*(Complex s, const BosonPolynomial& p) { return AlphaPoly(s) * p; }
  friend BosonPolynomial operator*(double s, const BosonPolynomial& p) { return AlphaPoly(s) * p; }
  friend bool operator==(const BosonPolynomial& p, const BosonPolynomial& q) { return p.terms_ == q.terms_; }

 private:
  Terms terms_;
};

/// Normal-ordered product, using a^n (a^dagger)^m = sum_k k! C(n,k) C(m,k) (a^dagger)^{m-k} a^{n-k}.
inline BosonPolynomial multiply(const BosonPolynomial& p, const BosonPolynomial& q) {
  detail::PolyAccumulator<Monomial> acc;
  for (const auto& [kp, cp] : p.terms()) {
    const auto [m1, n1] = kp;
    for (const auto& [kq, cq] : q.terms()) {
      const auto [m2, n2] = kq;
      const AlphaPoly c = cp * cq;
      for (int k = 0; k <= std::min(n1, m2); ++k) {
        const double w = detail::factorial(k) * detail::binomial(n1, k) * detail::binomial(m2, k);
        acc.add({m1 + m2 - k, n1 + n2 - k}, c, w);
      }
    }
  }
  return BosonPolynomial(acc.finish());
}

inline BosonPolynomial operator*(const BosonPolynomial& p, const BosonPolynomial& q) { return multiply(p, q); }

/// P with a replaced by `r` (and a^dagger by r^dagger). Valid as an operator identity when
/// [r, r^dagger] = 1, i.e. for any unitary change of frame.
inline BosonPolynomial substitute_mode(const BosonPolynomial& p, const BosonPolynomial& r) {
  const int max_m = [&] {
    int d = 0;
    for (const auto& [k, c] : p.terms()) d = std::max(d, std::max(k.first, k.second));
    return d;
  }();
  const BosonPolynomial rd = r.adjoint();
  std::vector<BosonPolynomial> rpow{BosonPolynomial::constant(1.0)};
  std::vector<BosonPolynomial> rdpow{BosonPolynomial::constant(1.0)};
  for (int i = 1; i <= max_m; ++i) {
    rpow.push_back(multiply(rpow.back(), r));
    rdpow.push_back(multiply(rd, rdpow.back()));
  }
  detail::PolyAccumulator<Monomial> acc;
  for (const auto& [k, c] : p.terms()) {
    const BosonPolynomial term = multiply(rdpow[static_cast<std::size_t>(k.first)], rpow[static_cast<std::size_t>(k.second)]);
    for (const auto& [kt, ct] : term.terms()) acc.add(kt, c * ct);
  }
  return BosonPolynomial(acc.finish());
}

/// a -> a + alpha with alpha symbolic.
inline BosonPolynomial substitute_displacement(const BosonPolynomial& p) {
  return substitute_mode(p, BosonPolynomial::a() + BosonPolynomial::constant(AlphaPoly::monomial(1)));
}

/// a -> cosh(zeta) a + sinh(zeta) a^dagger with zeta = ln(lambda).
inline BosonPolynomial substitute_squeeze(const BosonPolynomial& p, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), "substitute_squeeze: lambda must be positive");
  const double zeta = std::log(lambda);
  return substitute_mode(p, std::cosh(zeta) * BosonPolynomial::a() + std::sinh(zeta) * BosonPolynomial::adag());
}

/// a -> cosh(ln lambda) a + sinh(ln lambda) a^dagger + alpha. The displacement is applied first
/// so that alpha-scale cancellations happen before any lambda-dependent rounding.
inline BosonPolynomial substitute_gaussian_frame(const BosonPolynomial& p, double lambda) {
  return substitute_squeeze(substitute_displacement(p), lambda);
}

/// -chi/2 a^dagger^2 a^2 + delta a^dagger a + beta a^dagger + conj(beta) a.
inline BosonPolynomial driven_kerr(double chi, const AlphaPoly& delta, const AlphaPoly& beta) {
  require(chi > 0.0 && std::isfinite(chi), "driven_kerr: chi must be positive");
  BosonPolynomial::Terms t;
  t.emplace(Monomial{2, 2}, AlphaPoly(-0.5 * chi));
  t.emplace(Monomial{1, 1}, delta);
  t.emplace(Monomial{1, 0}, beta);
  t.emplace(Monomial{0, 1}, beta.conj());
  return BosonPolynomial(std::move(t));
}

struct CubicGateParams {
  double chi = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  AlphaPoly delta;  // 3 chi alpha^2 - chi
  AlphaPoly beta;   // -2 chi alpha^3
  double tau = 0.0;
  double mu = 0.0;
};

inline AlphaPoly cubic_detuning(double chi) { return AlphaPoly({Complex(-chi), 0.0, Complex(3.0 * chi)}); }
inline AlphaPoly cubic_drive(double chi) { return AlphaPoly::monomial(3, -2.0 * chi); }

inline CubicGateParams cubic_parameters(double chi, double lambda, double alpha, double gamma) {
  for (double v : {chi, lambda, alpha, gamma}) {
    require(v > 0.0 && std::isfinite(v), "cubic_parameters: chi, lambda, alpha and gamma must be positive");
  }
  CubicGateParams out{chi, lambda, alpha, gamma, cubic_detuning(chi), cubic_drive(chi), 0.0, 0.0};
  out.mu = chi * lambda * lambda * lambda * alpha / std::numbers::sqrt2;
  out.tau = std::numbers::sqrt2 * gamma / (chi * alpha * lambda * lambda * lambda);
  // Move mu and tau by a few ulps so that mu * tau reproduces gamma bit for bit.
  double up = out.mu;
  double down = out.mu;
  for (int i = 0; i < 32; ++i) {
    double mu = i % 2 == 0 ? up : down;
    double t = gamma / mu;
    for (int j = 0; j < 4 && mu * t != gamma; ++j) t = std::nextafter(t, mu * t > gamma ? 0.0 : 1e300);
    if (mu * t == gamma) {
      out.mu = mu;
      out.tau = t;
      return out;
    }
    if (i % 2 == 0) up = std::nextafter(up, 1e300);
    else down = std::nextafter(down, 0.0);
  }
  return out;
}

/// Driven Kerr Hamiltonian in the squeezed-displaced frame, constant dropped.
inline BosonPolynomial effective_hamiltonian(double chi, double lambda, const AlphaPoly& delta, const AlphaPoly& beta) {
  return substitute_gaussian_frame(driven_kerr(chi, delta, beta), lambda).drop_constant();
}

/// Effective Hamiltonian with the cubic counter-terms inserted symbolically.
inline BosonPolynomial effective_cubic_hamiltonian(double chi, double lambda, double alpha, double gamma) {
  const CubicGateParams params = cubic_parameters(chi, lambda, alpha, gamma);
  return effective_hamiltonian(chi, lambda, params.delta, params.beta);
}

/// Matrix of P at numeric alpha on the first n Fock levels (exact projection).
inline Operator to_matrix(const BosonPolynomial& p, double alpha, int n) {
  require(n >= 2, "to_matrix: dimension must be at least 2");
  if (p.degree() >= n) {
    throw InvalidArgument("to_matrix: polynomial degree " + std::to_string(p.degree()) +
                          " is not below the dimension " + std::to_string(n));
  }
  Matrix out = Matrix::Zero(n, n);
  for (const auto& [key, coeff] : p.terms()) {
    const auto [m, pw] = key;
    const Complex c = coeff.evaluate(alpha);
    if (c == Complex(0.0)) continue;
    // <k| a^dagger^m a^pw |l> with j = l - pw and k = j + m.
    // Integer products stay exact below 2^53, so diagonal weights come out as exact integers.
    for (int j = 0; j + std::max(m, pw) < n; ++j) {
      double w = 1.0;
      for (int i = 1; i <= pw; ++i) w *= j + i;
      for (int i = 1; i <= m; ++i) w *= j + i;
      out(j + m, j + pw) += c * std::sqrt(w);
    }
  }
  Operator candidate(out);
  return Operator(std::move(out), candidate.check_hermitian(1e-12));
}

// ---------------------------------------------------------------------------
// Quadrature form

/// (power of x, power of p) in a symmetric (Weyl) ordering.
using QuadratureMonomial = std::pair<int, int>;
using QuadratureForm = std::map<QuadratureMonomial, AlphaPoly>;

/// Symmetric-ordered x/p expansion of a normal-ordered polynomial.
inline QuadratureForm weyl_form(const BosonPolynomial& poly) {
  // First the Weyl symbol in z = (x + i p)/sqrt(2): a^dagger^m a^n has symbol
  // sum_k (-1/2)^k / k! * m!/(m-k)! * n!/(n-k)! z*^{m-k} z^{n-k}.
  detail::PolyAccumulator<Monomial> zsym;
  for (const auto& [key, c] : poly.terms()) {
    const auto [m, n] = key;
    for (int k = 0; k <= std::min(m, n); ++k) {
      const double w = std::pow(-0.5, k) / detail::factorial(k) * detail::falling(m, k) * detail::falling(n, k);
      zsym.add({m - k, n - k}, c, w);
    }
  }
  // z*^u z^v = 2^{-(u+v)/2} (x - i p)^u (x + i p)^v.
  detail::PolyAccumulator<QuadratureMonomial> acc;
  for (const auto& [key, c] : zsym.finish()) {
    const auto [u, v] = key;
    const double norm = std::pow(2.0, -0.5 * (u + v));
    for (int i = 0; i <= u; ++i) {
      const Complex fu = detail::binomial(u, i) * std::pow(Complex(0.0, -1.0), i);
      for (int j = 0; j <= v; ++j) {
        const Complex fv = detail::binomial(v, j) * std::pow(Complex(0.0, 1.0), j);
        acc.add({u - i + v - j, i + j}, c, norm * fu * fv);
      }
    }
  }
  return acc.finish();
}

inline AlphaPoly quadrature_coefficient(const QuadratureForm& form, int x_power, int p_power) {
  auto it = form.find({x_power, p_power});
  return it == form.end() ? AlphaPoly() : it->second;
}

/// Human-readable label such as "x^2 p^2".
inline std::string quadrature_label(const QuadratureMonomial& m) {
  std::ostringstream os;
  auto part = [&](char sym, int power) {
    if (power == 0) return;
    if (os.tellp() > 0) os << ' ';
    os << sym;
    if (power > 1) os << '^' << power;
  };
  part('x', m.first);
  part('p', m.second);
  return os.tellp() > 0 ? os.str() : std::string("1");
}

}  // namespace kerrcubic
