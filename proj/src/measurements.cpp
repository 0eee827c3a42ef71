#include "atomkernel/measurements.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "atomkernel/rng.hpp"

namespace atomkernel {

namespace {

const cplx kI(0.0, 1.0);

// sin(u)/u and its derivative, series-switched near zero. The closed form of
// the derivative cancels catastrophically for small u, hence the wider
// threshold there.
double sin_over(double u) {
  if (std::fabs(u) < 1e-4) {
    const double u2 = u * u;
    return 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 * u2 * u2 / 5040.0;
  }
  return std::sin(u) / u;
}

double sin_over_deriv(double u) {
  if (std::fabs(u) < 1e-2) {
    const double u2 = u * u;
    return u * (-1.0 / 3.0 + u2 / 30.0 - u2 * u2 / 840.0);
  }
  return std::cos(u) / u - std::sin(u) / (u * u);
}

}  // namespace

MeasurementOperator MeasurementOperator::torus_fourier(int m, bool normalized) {
  if (m < 1) throw InvalidValueError("torus Fourier degree must be positive");
  MeasurementOperator op;
  op.type = Type::TorusFourier;
  op.m = m;
  op.normalized = normalized;
  return op;
}

MeasurementOperator MeasurementOperator::mollified_fourier(int m, double L, double rho,
                                                           bool normalized) {
  if (m < 1) throw InvalidValueError("mollified Fourier degree must be positive");
  if (!(L > 0.0)) throw InvalidValueError("window length must be positive");
  if (!(rho > 0.0) || rho > 0.5) throw InvalidValueError("rho must lie in (0, 1/2]");
  if (!(double(2 * m + 1) / L < 1.0)) {
    throw InvalidValueError("mollified family needs (2m+1)/L < 1");
  }
  MeasurementOperator op;
  op.type = Type::MollifiedFourier;
  op.m = m;
  op.L = L;
  op.rho = rho;
  op.normalized = normalized;
  return op;
}

MeasurementOperator MeasurementOperator::bargmann_monomials(int N, bool normalized) {
  if (N < 0) throw InvalidValueError("monomial degree bound must be nonnegative");
  MeasurementOperator op;
  op.type = Type::BargmannMonomials;
  op.N = N;
  op.normalized = normalized;
  return op;
}

int MeasurementOperator::count() const {
  switch (type) {
    case Type::TorusFourier:
    case Type::MollifiedFourier:
      return 2 * m + 1;
    case Type::BargmannMonomials:
      return N + 2;
  }
  return 0;
}

DomainKind MeasurementOperator::domain() const {
  switch (type) {
    case Type::TorusFourier: return DomainKind::Torus;
    case Type::MollifiedFourier: return DomainKind::Line;
    case Type::BargmannMonomials: return DomainKind::Plane;
  }
  return DomainKind::Line;
}

const char* MeasurementOperator::name() const {
  switch (type) {
    case Type::TorusFourier: return "torus_fourier";
    case Type::MollifiedFourier: return "mollified_fourier";
    case Type::BargmannMonomials: return "bargmann_monomials";
  }
  return "?";
}

double mollifier_window(double L, double rho, double t) {
  const double a = 2.0 * M_PI * rho / L;
  return std::sqrt(L / (2.0 * rho)) * (a / M_PI) * sin_over(a * t);
}

double mollifier_window_deriv(double L, double rho, double t) {
  const double a = 2.0 * M_PI * rho / L;
  return std::sqrt(L / (2.0 * rho)) * (a / M_PI) * a * sin_over_deriv(a * t);
}

namespace {

void require_point(const MeasurementOperator& op, const DomainPoint& x) {
  if (x.kind() != op.domain()) {
    throw VariantMismatchError(std::string(op.name()) + " measures " +
                               to_string(op.domain()) + " atoms, got " +
                               to_string(x.kind()));
  }
}

}  // namespace

Eigen::VectorXcd atom_response(const MeasurementOperator& op, const DomainPoint& x) {
  require_point(op, x);
  Eigen::VectorXcd a(op.count());
  switch (op.type) {
    case MeasurementOperator::Type::TorusFourier: {
      const double scale = op.normalized ? 1.0 / std::sqrt(double(2 * op.m + 1)) : 1.0;
      const double t = x.coord();
      for (int j = -op.m; j <= op.m; ++j) {
        a(j + op.m) = scale * std::exp(-2.0 * M_PI * kI * double(j) * t);
      }
      break;
    }
    case MeasurementOperator::Type::MollifiedFourier: {
      const double t = x.coord();
      const double h = mollifier_window(op.L, op.rho, t);
      for (int k = -op.m; k <= op.m; ++k) {
        a(k + op.m) = h * std::exp(-2.0 * M_PI * kI * double(k) * t / op.L);
      }
      break;
    }
    case MeasurementOperator::Type::BargmannMonomials: {
      const cplx w = x.z();
      const cplx wb = std::conj(w);
      cplx cur = std::exp(cplx(-0.5 * std::norm(w), 0.0));
      for (int n = 0; n <= op.N + 1; ++n) {
        a(n) = cur;
        cur *= wb / std::sqrt(double(n + 1));
      }
      break;
    }
  }
  return a;
}

ResponseDerivs atom_response_derivs(const MeasurementOperator& op, const DomainPoint& x) {
  require_point(op, x);
  ResponseDerivs d;
  const Eigen::VectorXcd a = atom_response(op, x);
  switch (op.type) {
    case MeasurementOperator::Type::TorusFourier: {
      d.d_first.resize(a.size());
      for (int j = -op.m; j <= op.m; ++j) {
        d.d_first(j + op.m) = -2.0 * M_PI * kI * double(j) * a(j + op.m);
      }
      break;
    }
    case MeasurementOperator::Type::MollifiedFourier: {
      const double t = x.coord();
      const double h = mollifier_window(op.L, op.rho, t);
      const double hp = mollifier_window_deriv(op.L, op.rho, t);
      d.d_first.resize(a.size());
      for (int k = -op.m; k <= op.m; ++k) {
        const cplx phase = std::exp(-2.0 * M_PI * kI * double(k) * t / op.L);
        d.d_first(k + op.m) = phase * (hp - 2.0 * M_PI * kI * double(k) / op.L * h);
      }
      break;
    }
    case MeasurementOperator::Type::BargmannMonomials: {
      // a_n depends on w through exp(-|w|^2/2) conj(w)^n, so
      //   da_n/dx = -x a_n + sqrt(n) a_{n-1}
      //   da_n/dy = -y a_n - i sqrt(n) a_{n-1}.
      const cplx w = x.z();
      d.d_first.resize(a.size());
      d.d_second.resize(a.size());
      for (int n = 0; n <= op.N + 1; ++n) {
        const cplx prev = (n == 0) ? cplx(0.0, 0.0) : cplx(std::sqrt(double(n)), 0.0) * a(n - 1);
        d.d_first(n) = -w.real() * a(n) + prev;
        d.d_second(n) = -w.imag() * a(n) - kI * prev;
      }
      break;
    }
  }
  return d;
}

namespace {

void require_compatible(const MeasurementOperator& op, const KernelSpace& space) {
  if (space.domain() != op.domain()) {
    throw VariantMismatchError(std::string(op.name()) + " cannot measure a " +
                               space.name() + " space");
  }
  if (op.type == MeasurementOperator::Type::TorusFourier && op.m > space.m) {
    throw InvalidValueError("measurement degree exceeds the space degree");
  }
}

}  // namespace

MeasurementVector apply(const MeasurementOperator& op, const KernelSpace& space,
                        const AtomicMeasure& mu, const ContaminationSpec* contamination) {
  require_compatible(op, space);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(op.count());
  auto accumulate = [&](const AtomicMeasure& part) {
    for (const auto& atom : part) v += atom.c * atom_response(op, atom.x);
  };
  accumulate(mu);
  if (contamination != nullptr) accumulate(contamination->measure);
  return MeasurementVector{op, std::move(v)};
}

AdjointFunction::AdjointFunction(MeasurementOperator op, Eigen::VectorXcd nu)
    : op_(op), nu_(std::move(nu)) {
  if (nu_.size() != op_.count()) {
    throw InvalidValueError("coefficient count does not match the measurement family");
  }
}

cplx AdjointFunction::operator()(const DomainPoint& x) const {
  // psi(x) = sum_k conj(a_k(x)) nu_k, the function M* nu evaluated at x.
  return atom_response(op_, x).dot(nu_);
}

AdjointFunction adjoint_function(const MeasurementOperator& op, const Eigen::VectorXcd& nu) {
  return AdjointFunction(op, nu);
}

MeasurementVector add_noise(const MeasurementVector& mv, double eps, std::uint64_t seed) {
  if (eps < 0.0) throw InvalidValueError("noise level must be nonnegative");
  if (eps == 0.0) return mv;
  Rng rng(seed);
  Eigen::VectorXcd dir(mv.values.size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal_complex();
  const double n = dir.norm();
  if (n == 0.0) {
    dir.setZero();
    dir(0) = cplx(1.0, 0.0);
  } else {
    dir /= n;
  }
  MeasurementVector out = mv;
  out.values += eps * dir;
  return out;
}

cplx TrigPoly::eval(double y) const {
  cplx acc(0.0, 0.0);
  for (int k = -m; k <= m; ++k) {
    acc += coeffs(k + m) * std::exp(2.0 * M_PI * kI * double(k) * y);
  }
  return acc;
}

TrigPoly encode_trig_poly(const MeasurementVector& mv) {
  if (mv.op.type != MeasurementOperator::Type::MollifiedFourier) {
    throw InvalidValueError("only mollified measurements re-encode as a trig polynomial");
  }
  return TrigPoly{mv.op.m, mv.values};
}

double bargmann_tail_mass(double R, int N) {
  // sum_{n >= N+2} exp(-R^2) R^{2n} / n!, the energy a degree-(N+1) monomial
  // family misses on a unit atom at radius R (the worst position in the disc).
  const double u = R * R;
  double log_term = -u + double(N + 2) * std::log(u) - std::lgamma(double(N + 3));
  double term = std::exp(log_term);
  double sum = 0.0;
  for (int n = N + 2; n < N + 2 + 4 * (N + 2) + 64; ++n) {
    sum += term;
    term *= u / double(n + 1);
    if (term < 1e-300) break;
  }
  return sum;
}

int bargmann_truncation_degree(double R, double tail_tol) {
  if (!(R > 0.0)) throw InvalidValueError("radius must be positive");
  int N = std::max(0, int(std::ceil(2.0 * std::exp(1.0) * R * R)) - 2);
  while (bargmann_tail_mass(R, N) > tail_tol) ++N;
  return N;
}

AtomicMeasure radar_to_bargmann(const std::vector<Reflector>& reflectors, double lambda) {
  if (!(lambda > 0.0)) throw InvalidValueError("window width must be positive");
  std::vector<Atom> atoms;
  atoms.reserve(reflectors.size());
  for (const auto& rf : reflectors) {
    const cplx z(lambda * rf.tau, -M_PI * rf.omega / lambda);
    const cplx weight = rf.r * std::exp(kI * M_PI * rf.tau * rf.omega);
    atoms.push_back(Atom{DomainPoint::plane(z), weight});
  }
  return AtomicMeasure(std::move(atoms));
}

nlohmann::json op_to_json(const MeasurementOperator& op) {
  nlohmann::json j;
  j["type"] = op.name();
  j["normalized"] = op.normalized;
  switch (op.type) {
    case MeasurementOperator::Type::TorusFourier:
      j["m"] = op.m;
      break;
    case MeasurementOperator::Type::MollifiedFourier:
      j["m"] = op.m;
      j["L"] = op.L;
      j["rho"] = op.rho;
      break;
    case MeasurementOperator::Type::BargmannMonomials:
      j["N"] = op.N;
      break;
  }
  return j;
}

MeasurementOperator op_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  const bool normalized = j.value("normalized", true);
  if (type == "torus_fourier") {
    return MeasurementOperator::torus_fourier(j.at("m").get<int>(), normalized);
  }
  if (type == "mollified_fourier") {
    return MeasurementOperator::mollified_fourier(j.at("m").get<int>(),
                                                  j.at("L").get<double>(),
                                                  j.at("rho").get<double>(), normalized);
  }
  if (type == "bargmann_monomials") {
    return MeasurementOperator::bargmann_monomials(j.at("N").get<int>(), normalized);
  }
  throw ConfigError("unknown measurement operator type: " + type);
}

nlohmann::json measurement_to_json(const MeasurementVector& mv) {
  nlohmann::json j;
  j["op"] = op_to_json(mv.op);
  nlohmann::json vals = nlohmann::json::array();
  for (Eigen::Index i = 0; i < mv.values.size(); ++i) {
    vals.push_back({mv.values(i).real(), mv.values(i).imag()});
  }
  j["values"] = std::move(vals);
  return j;
}

MeasurementVector measurement_from_json(const nlohmann::json& j) {
  MeasurementOperator op = op_from_json(j.at("op"));
  const auto& vals = j.at("values");
  if (!vals.is_array() || int(vals.size()) != op.count()) {
    throw ConfigError("measurement value count does not match the operator");
  }
  Eigen::VectorXcd v(op.count());
  for (int i = 0; i < op.count(); ++i) {
    v(i) = cplx(vals.at(i).at(0).get<double>(), vals.at(i).at(1).get<double>());
  }
  return MeasurementVector{op, std::move(v)};
}

}  // namespace atomkernel
