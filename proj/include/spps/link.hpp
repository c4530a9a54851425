#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "spps/errors.hpp"

namespace spps {

enum class LinkKind { logistic, probit };

/// Strictly increasing CDF used as the inner link of the propensity model.
class Link {
 public:
  constexpr Link() = default;
  constexpr explicit Link(LinkKind kind) : kind_(kind) {}

  static Link logistic() { return Link(LinkKind::logistic); }
  static Link probit() { return Link(LinkKind::probit); }

  LinkKind kind() const { return kind_; }

  double cdf(double u) const {
    if (kind_ == LinkKind::logistic) {
      // Branches keep exp() from overflowing.
      if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
      const double e = std::exp(u);
      return e / (1.0 + e);
    }
    return 0.5 * std::erfc(-u / std::numbers::sqrt2);
  }

  double pdf(double u) const {
    if (kind_ == LinkKind::logistic) {
      const double e = std::exp(-std::abs(u));
      return e / ((1.0 + e) * (1.0 + e));
    }
    return std::exp(-0.5 * u * u) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  }

  // d/du of pdf(u); needed for the observed information in Newton steps.
  double pdf_derivative(double u) const {
    if (kind_ == LinkKind::logistic) return pdf(u) * (1.0 - 2.0 * cdf(u));
    return -u * pdf(u);
  }

  struct Point {
    double cdf;
    double cdf_complement;  // 1 - cdf, without cancellation
    double pdf;
    double pdf_derivative;
  };

  Point evaluate(double u) const {
    if (kind_ == LinkKind::logistic) {
      const double e = std::exp(-std::abs(u));
      const double a = 1.0 / (1.0 + e);
      const double lower = e * a;
      const double cdf = u >= 0.0 ? a : lower;
      const double ccdf = u >= 0.0 ? lower : a;
      const double density = lower * a;
      return {cdf, ccdf, density, density * (ccdf - cdf)};
    }
    const double density = pdf(u);
    return {cdf(u), cdf(-u), density, -u * density};
  }

  std::string_view name() const { return kind_ == LinkKind::logistic ? "logistic" : "probit"; }

  friend bool operator==(const Link&, const Link&) = default;

 private:
  LinkKind kind_ = LinkKind::logistic;
};

inline Link parse_link(std::string_view name) {
  if (name == "logistic" || name == "logit") return Link::logistic();
  if (name == "probit") return Link::probit();
  throw InputError("unknown link '" + std::string(name) + "' (expected logistic or probit)");
}

}  // namespace spps
