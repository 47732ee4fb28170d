#include "optexec/lob_shape.hpp"

#include "optexec/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace optexec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

LobShape::LobShape(ShapeKind kind, double kappa, double gamma, std::vector<ShapeKnot> knots)
    : kind_(kind), kappa_(kappa), gamma_(gamma), knots_(std::move(knots)) {}

LobShape LobShape::power_law(double kappa, double gamma) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw ConfigError("power-law shape: kappa must be positive, got " + std::to_string(kappa));
    }
    if (!std::isfinite(gamma)) {
        throw ConfigError("power-law shape: gamma must be finite");
    }
    return LobShape(ShapeKind::PowerLaw, kappa, gamma, {});
}

LobShape LobShape::block(double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw ConfigError("block shape: kappa must be positive, got " + std::to_string(kappa));
    }
    return LobShape(ShapeKind::Block, kappa, 0.0, {});
}

LobShape LobShape::tabulated(std::vector<ShapeKnot> knots) {
    if (knots.size() < 2) {
        throw ConfigError("tabulated shape: at least two knots required");
    }
    if (knots.front().price != 0.0 || knots.front().volume != 0.0) {
        throw ConfigError("tabulated shape: first knot must be (0, 0)");
    }
    for (std::size_t s = 1; s < knots.size(); ++s) {
        if (!(knots[s].price > knots[s - 1].price)) {
            throw ConfigError("tabulated shape: prices must be strictly increasing (knot " +
                              std::to_string(s) + ")");
        }
        if (knots[s].volume < knots[s - 1].volume) {
            throw ConfigError("tabulated shape: volumes must be non-decreasing (knot " +
                              std::to_string(s) + ")");
        }
    }
    if (!(knots.back().volume > 0.0)) {
        throw ConfigError("tabulated shape: book holds no volume");
    }
    return LobShape(ShapeKind::Tabulated, 1.0, 0.0, std::move(knots));
}

double LobShape::saturation_volume() const noexcept {
    switch (kind_) {
    case ShapeKind::Tabulated:
        return knots_.back().volume;
    case ShapeKind::PowerLaw:
        return gamma_ > 1.0 ? kappa_ / (gamma_ - 1.0) : kInf;
    case ShapeKind::Block:
        break;
    }
    return kInf;
}

void LobShape::check_volume(double volume) const {
    if (volume < 0.0 || std::isnan(volume)) {
        throw DomainError("order book volume must be non-negative");
    }
    const double saturation = saturation_volume();
    const bool beyond = kind_ == ShapeKind::Tabulated ? volume > saturation : volume >= saturation;
    if (beyond) {
        std::ostringstream msg;
        msg << "volume " << volume << " exceeds the book's saturation volume " << saturation;
        throw DomainError(msg.str());
    }
}

double LobShape::depth(double price) const {
    if (price < 0.0 || std::isnan(price)) {
        throw DomainError("price offset must be non-negative");
    }
    if (kind_ == ShapeKind::Tabulated) {
        if (price >= knots_.back().price) return knots_.back().volume;
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), price,
                                         [](double p, const ShapeKnot& k) { return p < k.price; });
        const ShapeKnot& hi = *it;
        const ShapeKnot& lo = *(it - 1);
        const double w = (price - lo.price) / (hi.price - lo.price);
        return lo.volume + w * (hi.volume - lo.volume);
    }
    if (kind_ == ShapeKind::Block || gamma_ == 0.0) return kappa_ * price;
    if (gamma_ == 1.0) return kappa_ * std::log1p(price);
    const double g = 1.0 - gamma_;
    return kappa_ / g * std::expm1(g * std::log1p(price));
}

double LobShape::deviation(double volume) const {
    check_volume(volume);
    if (volume == 0.0) return 0.0;
    if (kind_ == ShapeKind::Tabulated) return tabulated_deviation(volume);
    if (kind_ == ShapeKind::Block || gamma_ == 0.0) return volume / kappa_;
    if (gamma_ == 1.0) return std::expm1(volume / kappa_);
    const double g = 1.0 - gamma_;
    return std::expm1(std::log1p(g * volume / kappa_) / g);
}

double LobShape::impact_cost(double volume) const {
    check_volume(volume);
    if (volume == 0.0) return 0.0;
    if (kind_ == ShapeKind::Tabulated) return tabulated_cost(volume);
    if (kind_ == ShapeKind::Block || gamma_ == 0.0) return volume * volume / (2.0 * kappa_);
    if (gamma_ == 1.0) return kappa_ * std::expm1(volume / kappa_) - volume;
    if (gamma_ == 2.0) {
        // The closed-form antiderivative degenerates at gamma = 2.
        auto psi = [this](double z) { return deviation(z); };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(psi, 0.0, volume, 15,
                                                                             1e-13);
    }
    const double g = 1.0 - gamma_;
    const double p = (2.0 - gamma_) / g;
    return kappa_ / (2.0 - gamma_) * std::expm1(p * std::log1p(g * volume / kappa_)) - volume;
}

double LobShape::block_cost(double volume, double amount) const {
    if (amount < 0.0 || std::isnan(amount)) {
        throw DomainError("block size must be non-negative");
    }
    if (amount == 0.0) {
        check_volume(volume);
        return 0.0;
    }
    return impact_cost(volume + amount) - impact_cost(volume);
}

double LobShape::tabulated_deviation(double volume) const {
    // First knot whose volume reaches `volume`; the segment before it is strictly increasing.
    const auto it = std::lower_bound(knots_.begin(), knots_.end(), volume,
                                     [](const ShapeKnot& k, double v) { return k.volume < v; });
    const ShapeKnot& hi = *it;
    const ShapeKnot& lo = *(it - 1);
    const double w = (volume - lo.volume) / (hi.volume - lo.volume);
    return lo.price + w * (hi.price - lo.price);
}

double LobShape::tabulated_cost(double volume) const {
    // psi is linear in volume on every strictly increasing segment, so the trapezoid is exact.
    double cost = 0.0;
    for (std::size_t s = 1; s < knots_.size(); ++s) {
        const ShapeKnot& lo = knots_[s - 1];
        const ShapeKnot& hi = knots_[s];
        if (hi.volume == lo.volume) continue;
        if (volume <= hi.volume) {
            const double partial = tabulated_deviation(volume);
            cost += 0.5 * (volume - lo.volume) * (lo.price + partial);
            return cost;
        }
        cost += 0.5 * (hi.volume - lo.volume) * (lo.price + hi.price);
    }
    return cost;
}

std::string LobShape::describe() const {
    std::ostringstream out;
    switch (kind_) {
    case ShapeKind::PowerLaw:
        out << "power_law(kappa=" << kappa_ << ", gamma=" << gamma_ << ")";
        break;
    case ShapeKind::Block:
        out << "block(kappa=" << kappa_ << ")";
        break;
    case ShapeKind::Tabulated:
        out << "tabulated(" << knots_.size() << " knots)";
        break;
    }
    return out.str();
}

A1Report validate_assumption_a1(const LobShape& shape, double b, double beta, double a,
                                double a_max, int samples) {
    A1Report report;
    report.worst_margin = kInf;
    if (!(a > 0.0) || !(a_max >= a) || samples < 2) {
        report.holds = false;
        report.note = "invalid sampling range";
        return report;
    }
    const double log_lo = std::log(a);
    const double log_hi = std::log(a_max);
    for (int s = 0; s < samples; ++s) {
        const double x = std::exp(log_lo + (log_hi - log_lo) * s / (samples - 1));
        const double margin = shape.depth(x) - b * std::pow(x, beta);
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_price = x;
        }
    }
    report.holds = report.worst_margin >= 0.0;

    // Sampling cannot see asymptotic failure: logarithmic or bounded depth loses to any power.
    const bool slow_growth = (shape.kind() == ShapeKind::PowerLaw && shape.gamma() >= 1.0) ||
                             shape.kind() == ShapeKind::Tabulated;
    if (slow_growth) {
        report.holds = false;
        report.note = "depth grows logarithmically or is bounded; no power-law lower bound for large prices";
    } else if (!report.holds) {
        report.note = "bound fails on the sampled range";
    }
    return report;
}

}  // namespace optexec
