#pragma once
// Concave-convex problem representations phi(x, y) on R^{n+m}, the gradient
// flow field, the skew/symmetric Hessian split A(z), B(z), and the
// constant-gains change of coordinates.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "saddleflow/errors.hpp"
#include "saddleflow/polynomial.hpp"
#include "saddleflow/rng.hpp"
#include "saddleflow/subspace.hpp"

namespace saddleflow {

class QuadraticSaddle;

/// Abstract concave-convex function phi(z), z = (x, y), x in R^n, y in R^m.
class SaddleProblem {
 public:
  virtual ~SaddleProblem() = default;

  int n() const { return n_; }
  int m() const { return m_; }
  Index dim() const { return static_cast<Index>(n_ + m_); }

  /// "quadratic", "lagrangian", "generic", ...
  virtual std::string form() const = 0;

  virtual double value(const Vec& z) const = 0;
  /// (phi_x, phi_y)
  virtual Vec gradient(const Vec& z) const = 0;
  /// Full Hessian phi_zz.
  virtual Mat hessian(const Vec& z) const = 0;

  /// out = (phi_x, -phi_y). Overridden by forms with an allocation-free path.
  virtual void flow_field_into(const Vec& z, Vec& out) const {
    out = gradient(z);
    out.tail(m_) *= -1.0;
  }

  /// Exact quadratic representation when phi is a polynomial of degree <= 2.
  virtual std::shared_ptr<const QuadraticSaddle> as_quadratic() const { return nullptr; }

  /// Stable text description used for fingerprints.
  virtual std::string describe() const = 0;

  std::string fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : describe()) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }

 protected:
  SaddleProblem(int n, int m) : n_(n), m_(m) {
    if (n < 0 || m < 0 || n + m == 0) throw InputError("problem dimensions must satisfy n, m >= 0 and n + m > 0");
  }

  void check_point(const Vec& z) const {
    if (z.size() != dim())
      throw InputError("point has dimension " + std::to_string(z.size()) + ", expected " + std::to_string(dim()));
    if (!z.allFinite()) throw InputError("point has non-finite entries");
  }

 private:
  int n_;
  int m_;
};

using ProblemPtr = std::shared_ptr<const SaddleProblem>;

namespace detail {

inline void append_matrix(std::ostringstream& os, const char* tag, const Mat& M) {
  os << tag << M.rows() << "x" << M.cols() << ":";
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) os << M(i, j) << ",";
}

inline double max_eig(const Mat& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double min_eig(const Mat& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline Mat symmetrized(const Mat& S, const char* name) {
  const double scale = std::max(1.0, max_abs(S));
  if (max_abs(S - S.transpose()) > 1e-12 * scale)
    throw InputError(std::string(name) + " must be symmetric");
  return 0.5 * (S + S.transpose());
}

}  // namespace detail

/// phi(x, y) = c + p'x + q'y + x'Pxx x / 2 + x'Pxy y + y'Pyy y / 2,
/// with Pxx <= 0 and Pyy >= 0.
class QuadraticSaddle final : public SaddleProblem {
 public:
  QuadraticSaddle(const Mat& Pxx, const Mat& Pyy, const Mat& Pxy, const Vec& p, const Vec& q, double c = 0.0)
      : SaddleProblem(static_cast<int>(Pxx.rows()), static_cast<int>(Pyy.rows())), c_(c) {
    const Index n = Pxx.rows(), m = Pyy.rows();
    if (Pxx.cols() != n || Pyy.cols() != m || Pxy.rows() != n || Pxy.cols() != m || p.size() != n || q.size() != m)
      throw InputError("quadratic: block dimensions are inconsistent");
    for (const Mat* M : {&Pxx, &Pyy, &Pxy})
      if (!M->allFinite()) throw InputError("quadratic: non-finite matrix entries");
    if (!p.allFinite() || !q.allFinite() || !std::isfinite(c)) throw InputError("quadratic: non-finite vector entries");
    Pxx_ = detail::symmetrized(Pxx, "Pxx");
    Pyy_ = detail::symmetrized(Pyy, "Pyy");
    Pxy_ = Pxy;
    p_ = p;
    q_ = q;
    if (detail::max_eig(Pxx_) > 1e-10) throw InputError("quadratic: Pxx must be negative semidefinite (concavity in x)");
    if (detail::min_eig(Pyy_) < -1e-10) throw InputError("quadratic: Pyy must be positive semidefinite (convexity in y)");
    J_.resize(n + m, n + m);
    J_ << Pxx_, Pxy_, -Pxy_.transpose(), -Pyy_;
    f0_.resize(n + m);
    f0_ << p_, -q_;
  }

  const Mat& Pxx() const { return Pxx_; }
  const Mat& Pyy() const { return Pyy_; }
  const Mat& Pxy() const { return Pxy_; }
  const Vec& p() const { return p_; }
  const Vec& q() const { return q_; }
  double c() const { return c_; }

  /// Jacobian of the flow field, A + B (constant).
  const Mat& flow_jacobian() const { return J_; }
  /// Flow field at the origin.
  const Vec& flow_offset() const { return f0_; }

  std::string form() const override { return "quadratic"; }

  double value(const Vec& z) const override {
    check_point(z);
    const auto x = z.head(n()), y = z.tail(m());
    return c_ + p_.dot(x) + q_.dot(y) + 0.5 * x.dot(Pxx_ * x) + x.dot(Pxy_ * y) + 0.5 * y.dot(Pyy_ * y);
  }

  Vec gradient(const Vec& z) const override {
    check_point(z);
    const auto x = z.head(n()), y = z.tail(m());
    Vec g(dim());
    g.head(n()) = p_ + Pxx_ * x + Pxy_ * y;
    g.tail(m()) = q_ + Pxy_.transpose() * x + Pyy_ * y;
    return g;
  }

  Mat hessian(const Vec& z) const override {
    check_point(z);
    Mat H(dim(), dim());
    H << Pxx_, Pxy_, Pxy_.transpose(), Pyy_;
    return H;
  }

  void flow_field_into(const Vec& z, Vec& out) const override {
    out.resize(dim());
    out.noalias() = J_ * z;
    out += f0_;
  }

  std::shared_ptr<const QuadraticSaddle> as_quadratic() const override {
    return std::make_shared<QuadraticSaddle>(*this);
  }

  std::string describe() const override {
    std::ostringstream os;
    os.precision(17);
    os << "quadratic;";
    detail::append_matrix(os, "Pxx", Pxx_);
    detail::append_matrix(os, "Pyy", Pyy_);
    detail::append_matrix(os, "Pxy", Pxy_);
    detail::append_matrix(os, "p", p_);
    detail::append_matrix(os, "q", q_);
    os << "c" << c_;
    return os.str();
  }

 private:
  Mat Pxx_, Pyy_, Pxy_;
  Vec p_, q_;
  double c_;
  Mat J_;
  Vec f0_;
};

/// Value/gradient/Hessian callbacks for a scalar function.
struct ScalarCallbacks {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
};

/// Sampling box used for probabilistic validation of callback forms.
struct ProbeOptions {
  int count = 64;
  double box = 2.0;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

inline std::vector<Vec> probe_points(Index d, const ProbeOptions& opts) {
  CounterRng rng(opts.seed, static_cast<std::uint64_t>(d));
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(opts.count) + 1);
  pts.push_back(Vec::Zero(d));
  for (int k = 0; k < opts.count; ++k) {
    Vec z(d);
    for (Index i = 0; i < d; ++i) z(i) = rng.uniform(-opts.box, opts.box);
    pts.push_back(std::move(z));
  }
  return pts;
}

}  // namespace detail

/// Concave utility U(x): a polynomial (exact path) or callbacks (sampled path).
class Utility {
 public:
  explicit Utility(Polynomial poly, int degree_cap = 6) : n_(poly.nvars()), poly_(std::move(poly)) {
    if (poly_->degree() > degree_cap)
      throw InputError("utility degree " + std::to_string(poly_->degree()) + " exceeds cap " +
                       std::to_string(degree_cap));
  }
  Utility(int n, ScalarCallbacks cb) : n_(n), cb_(std::move(cb)) {
    if (!cb_->value || !cb_->gradient || !cb_->hessian) throw InputError("utility callbacks must all be set");
  }

  int n() const { return n_; }
  bool is_polynomial() const { return poly_.has_value(); }
  const Polynomial& polynomial() const { return *poly_; }

  double value(const Vec& x) const { return poly_ ? poly_->eval(x) : cb_->value(x); }
  Vec gradient(const Vec& x) const { return poly_ ? poly_->gradient(x) : cb_->gradient(x); }
  Mat hessian(const Vec& x) const { return poly_ ? poly_->hessian(x) : cb_->hessian(x); }

  Utility scaled(const Vec& s) const {
    if (poly_) return Utility(poly_->scaled(s), std::max(6, poly_->degree()));
    auto inner = *cb_;
    ScalarCallbacks cb{
        [inner, s](const Vec& x) { return inner.value(s.cwiseProduct(x)); },
        [inner, s](const Vec& x) -> Vec { return s.cwiseProduct(inner.gradient(s.cwiseProduct(x))); },
        [inner, s](const Vec& x) -> Mat { return s.asDiagonal() * inner.hessian(s.cwiseProduct(x)) * s.asDiagonal(); }};
    return Utility(n_, std::move(cb));
  }

  std::string describe() const { return poly_ ? poly_->canonical() : "callbacks" + std::to_string(n_); }

 private:
  int n_;
  std::optional<Polynomial> poly_;
  std::optional<ScalarCallbacks> cb_;
};

/// phi(x, y) = U(x) + y'(D x + e).
class LinearConstraintLagrangian final : public SaddleProblem {
 public:
  LinearConstraintLagrangian(Utility U, const Mat& D, const Vec& e, const ProbeOptions& probes = {})
      : SaddleProblem(U.n(), static_cast<int>(D.rows())), U_(std::move(U)), D_(D), e_(e) {
    if (D_.cols() != n() || e_.size() != m()) throw InputError("lagrangian: D must be m x n and e an m-vector");
    if (!D_.allFinite() || !e_.allFinite()) throw InputError("lagrangian: non-finite D or e");
    for (const Vec& x : detail::probe_points(n(), probes)) {
      const Mat H = U_.hessian(x);
      if (!H.allFinite()) throw EvaluationError("lagrangian: non-finite utility Hessian");
      if (detail::max_eig(0.5 * (H + H.transpose())) > 1e-8)
        throw InputError("lagrangian: utility is not concave on the probe set");
    }
  }

  const Utility& utility() const { return U_; }
  const Mat& D() const { return D_; }
  const Vec& e() const { return e_; }

  std::string form() const override { return "lagrangian"; }

  double value(const Vec& z) const override {
    check_point(z);
    const Vec x = z.head(n());
    return U_.value(x) + z.tail(m()).dot(D_ * x + e_);
  }

  Vec gradient(const Vec& z) const override {
    check_point(z);
    const Vec x = z.head(n());
    Vec g(dim());
    g.head(n()) = U_.gradient(x) + D_.transpose() * z.tail(m());
    g.tail(m()) = D_ * x + e_;
    return g;
  }

  Mat hessian(const Vec& z) const override {
    check_point(z);
    Mat H = Mat::Zero(dim(), dim());
    H.topLeftCorner(n(), n()) = U_.hessian(z.head(n()));
    H.topRightCorner(n(), m()) = D_.transpose();
    H.bottomLeftCorner(m(), n()) = D_;
    return H;
  }

  std::shared_ptr<const QuadraticSaddle> as_quadratic() const override {
    if (!U_.is_polynomial() || U_.polynomial().degree() > 2) return nullptr;
    const Vec x0 = Vec::Zero(n());
    return std::make_shared<QuadraticSaddle>(U_.hessian(x0), Mat::Zero(m(), m()), D_.transpose(), U_.gradient(x0),
                                             e_, U_.value(x0));
  }

  std::string describe() const override {
    std::ostringstream os;
    os.precision(17);
    os << "lagrangian;U=" << U_.describe() << ";";
    detail::append_matrix(os, "D", D_);
    detail::append_matrix(os, "e", e_);
    return os.str();
  }

 private:
  Utility U_;
  Mat D_;
  Vec e_;
};

/// Problem given by callbacks; concavity-convexity is the caller's contract,
/// spot-checked on probe points when validation is enabled.
class GenericSaddle final : public SaddleProblem {
 public:
  GenericSaddle(int n, int m, ScalarCallbacks cb, std::string label = "callbacks", bool validate = true,
                const ProbeOptions& probes = {})
      : SaddleProblem(n, m), cb_(std::move(cb)), label_(std::move(label)) {
    if (!cb_.value || !cb_.gradient || !cb_.hessian) throw InputError("generic: callbacks must all be set");
    if (validate) run_validation(probes);
  }

  /// phi given as a polynomial in (x1..xn, y1..ym); derivatives are exact.
  static std::shared_ptr<GenericSaddle> from_polynomial(int n, int m, Polynomial phi, std::string label = {},
                                                        bool validate = true, const ProbeOptions& probes = {}) {
    if (phi.nvars() != n + m) throw InputError("generic: polynomial variable count must equal n + m");
    auto shared = std::make_shared<const Polynomial>(std::move(phi));
    ScalarCallbacks cb{[shared](const Vec& z) { return shared->eval(z); },
                       [shared](const Vec& z) -> Vec { return shared->gradient(z); },
                       [shared](const Vec& z) -> Mat { return shared->hessian(z); }};
    auto p = std::make_shared<GenericSaddle>(n, m, std::move(cb), label.empty() ? shared->canonical() : label,
                                             false, probes);
    p->poly_ = shared;
    if (validate) p->run_validation(probes);
    return p;
  }

  static std::shared_ptr<GenericSaddle> from_expression(int n, int m, const std::string& text, bool validate = true,
                                                        const ProbeOptions& probes = {}) {
    ExpressionParser parser(saddle_variable_names(n, m));
    return from_polynomial(n, m, parser.parse(text), "expr:" + text, validate, probes);
  }

  const std::shared_ptr<const Polynomial>& polynomial() const { return poly_; }

  std::string form() const override { return "generic"; }

  double value(const Vec& z) const override {
    check_point(z);
    const double v = call([&] { return cb_.value(z); });
    if (!std::isfinite(v)) throw EvaluationError("generic: non-finite value");
    return v;
  }

  Vec gradient(const Vec& z) const override {
    check_point(z);
    Vec g = call([&] { return cb_.gradient(z); });
    if (g.size() != dim() || !g.allFinite()) throw EvaluationError("generic: bad gradient output");
    return g;
  }

  void flow_field_into(const Vec& z, Vec& out) const override {
    if (!poly_) return SaddleProblem::flow_field_into(z, out);
    check_point(z);
    poly_->gradient_into(z, out);
    if (!out.allFinite()) throw EvaluationError("generic: bad gradient output");
    out.tail(m()) *= -1.0;
  }

  Mat hessian(const Vec& z) const override {
    check_point(z);
    Mat H = call([&] { return cb_.hessian(z); });
    if (H.rows() != dim() || H.cols() != dim() || !H.allFinite()) throw EvaluationError("generic: bad Hessian output");
    return H;
  }

  std::shared_ptr<const QuadraticSaddle> as_quadratic() const override {
    if (!poly_ || poly_->degree() > 2) return nullptr;
    const Vec z0 = Vec::Zero(dim());
    const Mat H = poly_->hessian(z0);
    const Vec g = poly_->gradient(z0);
    return std::make_shared<QuadraticSaddle>(H.topLeftCorner(n(), n()), H.bottomRightCorner(m(), m()),
                                             H.topRightCorner(n(), m()), g.head(n()), g.tail(m()), poly_->eval(z0));
  }

  std::string describe() const override {
    return "generic;" + std::to_string(n()) + "," + std::to_string(m()) + ";" + label_;
  }

 private:
  template <class F>
  static auto call(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      throw EvaluationError(std::string("generic: callback failed: ") + ex.what());
    }
  }

  void run_validation(const ProbeOptions& probes) const {
    for (const Vec& z : detail::probe_points(dim(), probes)) {
      const Mat H = hessian(z);
      // Central differences of the gradient.
      Mat Hfd(dim(), dim());
      for (Index j = 0; j < dim(); ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(z(j)));
        Vec zp = z, zm = z;
        zp(j) += h;
        zm(j) -= h;
        Hfd.col(j) = (gradient(zp) - gradient(zm)) / (2.0 * h);
      }
      if ((H - Hfd).norm() > 1e-5 * std::max(1.0, H.norm()))
        throw InputError("generic: Hessian callback disagrees with finite differences of the gradient");
      const Mat Hs = 0.5 * (H + H.transpose());
      if (detail::max_eig(Hs.topLeftCorner(n(), n())) > 1e-8)
        throw InputError("generic: phi is not concave in x on the probe set");
      if (detail::min_eig(Hs.bottomRightCorner(m(), m())) < -1e-8)
        throw InputError("generic: phi is not convex in y on the probe set");
    }
  }

  ScalarCallbacks cb_;
  std::string label_;
  std::shared_ptr<const Polynomial> poly_;
};

/// Positive per-coordinate gains (gamma_x, gamma_y).
class GainVector {
 public:
  GainVector(Vec gx, Vec gy) : gx_(std::move(gx)), gy_(std::move(gy)) {
    for (Index i = 0; i < gx_.size(); ++i)
      if (!(gx_(i) > 0.0) || !std::isfinite(gx_(i)))
        throw InputError("gains.x[" + std::to_string(i) + "] must be strictly positive");
    for (Index j = 0; j < gy_.size(); ++j)
      if (!(gy_(j) > 0.0) || !std::isfinite(gy_(j)))
        throw InputError("gains.y[" + std::to_string(j) + "] must be strictly positive");
  }

  static GainVector ones(int n, int m) { return GainVector(Vec::Ones(n), Vec::Ones(m)); }

  const Vec& x() const { return gx_; }
  const Vec& y() const { return gy_; }
  Index dim() const { return gx_.size() + gy_.size(); }

  /// (gamma_x, gamma_y) stacked.
  Vec gamma() const {
    Vec g(dim());
    g << gx_, gy_;
    return g;
  }
  /// Diagonal of Lambda = diag(sqrt(gamma)).
  Vec lambda() const { return gamma().cwiseSqrt(); }

  GainVector inverse() const { return GainVector(gx_.cwiseInverse(), gy_.cwiseInverse()); }

 private:
  Vec gx_, gy_;
};

/// phi'(z') = phi(Lambda z') for a problem without structure to exploit.
class ScaledSaddle final : public SaddleProblem {
 public:
  ScaledSaddle(ProblemPtr inner, Vec lambda)
      : SaddleProblem(inner->n(), inner->m()), inner_(std::move(inner)), lambda_(std::move(lambda)) {}

  std::string form() const override { return inner_->form(); }
  double value(const Vec& z) const override { return inner_->value(lambda_.cwiseProduct(z)); }
  Vec gradient(const Vec& z) const override {
    return lambda_.cwiseProduct(inner_->gradient(lambda_.cwiseProduct(z)));
  }
  Mat hessian(const Vec& z) const override {
    return lambda_.asDiagonal() * inner_->hessian(lambda_.cwiseProduct(z)) * lambda_.asDiagonal();
  }
  std::string describe() const override {
    std::ostringstream os;
    os.precision(17);
    os << "scaled;";
    detail::append_matrix(os, "L", lambda_);
    os << ";" << inner_->describe();
    return os.str();
  }

 private:
  ProblemPtr inner_;
  Vec lambda_;
};

/// (phi_x, -phi_y) at z.
inline Vec flow_field(const SaddleProblem& P, const Vec& z) {
  if (z.size() != P.dim()) throw InputError("flow_field: dimension mismatch");
  if (!z.allFinite()) throw InputError("flow_field: non-finite point");
  Vec out(P.dim());
  P.flow_field_into(z, out);
  if (!out.allFinite()) throw EvaluationError("flow_field: non-finite field value");
  return out;
}

/// A(z) = [[0, phi_xy], [-phi_yx, 0]].
inline Mat matrix_A(const SaddleProblem& P, const Vec& z) {
  const Mat H = P.hessian(z);
  const Index n = P.n(), m = P.m();
  Mat A = Mat::Zero(P.dim(), P.dim());
  const Mat Hxy = 0.5 * (H.topRightCorner(n, m) + H.bottomLeftCorner(m, n).transpose());
  A.topRightCorner(n, m) = Hxy;
  A.bottomLeftCorner(m, n) = -Hxy.transpose();
  return A;
}

/// B(z) = [[phi_xx, 0], [0, -phi_yy]].
inline Mat matrix_B(const SaddleProblem& P, const Vec& z) {
  const Mat H = P.hessian(z);
  const Index n = P.n(), m = P.m();
  Mat B = Mat::Zero(P.dim(), P.dim());
  const Mat Hxx = H.topLeftCorner(n, n), Hyy = H.bottomRightCorner(m, m);
  B.topLeftCorner(n, n) = 0.5 * (Hxx + Hxx.transpose());
  B.bottomRightCorner(m, m) = -0.5 * (Hyy + Hyy.transpose());
  return B;
}

/// B'(z) = B(z) + (A(z) - A(z_ref)); z_ref is the saddle playing the origin.
inline Mat matrix_Bprime(const SaddleProblem& P, const Vec& z, const Vec& z_ref) {
  return matrix_B(P, z) + (matrix_A(P, z) - matrix_A(P, z_ref));
}

/// Problem in the coordinates z' = Lambda^{-1} z, Lambda = diag(sqrt(gamma)),
/// so that the plain gradient flow of the result is the gains flow of P.
inline ProblemPtr apply_gains_transform(const ProblemPtr& P, const GainVector& g) {
  if (g.x().size() != P->n() || g.y().size() != P->m()) throw InputError("gains: dimension mismatch with problem");
  const Vec lx = g.x().cwiseSqrt(), ly = g.y().cwiseSqrt();
  if (auto Q = std::dynamic_pointer_cast<const QuadraticSaddle>(P)) {
    return std::make_shared<QuadraticSaddle>(lx.asDiagonal() * Q->Pxx() * lx.asDiagonal(),
                                             ly.asDiagonal() * Q->Pyy() * ly.asDiagonal(),
                                             lx.asDiagonal() * Q->Pxy() * ly.asDiagonal(),
                                             lx.cwiseProduct(Q->p()), ly.cwiseProduct(Q->q()), Q->c());
  }
  if (auto L = std::dynamic_pointer_cast<const LinearConstraintLagrangian>(P)) {
    return std::make_shared<LinearConstraintLagrangian>(L->utility().scaled(lx),
                                                        ly.asDiagonal() * L->D() * lx.asDiagonal(),
                                                        ly.cwiseProduct(L->e()));
  }
  if (auto G = std::dynamic_pointer_cast<const GenericSaddle>(P); G && G->polynomial())
    return GenericSaddle::from_polynomial(P->n(), P->m(), G->polynomial()->scaled(g.lambda()), {}, false);
  return std::make_shared<ScaledSaddle>(P, g.lambda());
}

}  // namespace saddleflow
