#pragma once

#include <span>
#include <string>
#include <vector>

namespace optexec {

enum class ShapeKind { PowerLaw, Block, Tabulated };

struct ShapeKnot {
    double price = 0.0;   ///< distance above the unaffected price
    double volume = 0.0;  ///< cumulative depth F at that price
};

/**
 * Shape of the shadow limit order book for one liquidity regime.
 *
 * Holds the cumulative depth F(x) (shares available within a price window x
 * above the unaffected price), its left-continuous generalized inverse
 * psi(y) = sup{a >= 0 : F(a) < y} (price deviation after consuming y shares),
 * and the impact cost Phi(y) = int_0^y psi.
 *
 * Power-law books use dF = kappa / (x + 1)^gamma dx. For gamma > 1 the book
 * holds only kappa / (gamma - 1) shares in total; asking for more throws
 * DomainError. Tabulated books interpolate F linearly between knots and are
 * flat after the last knot.
 *
 * Immutable after construction.
 */
class LobShape {
public:
    static LobShape power_law(double kappa, double gamma);
    static LobShape block(double kappa);
    /// Knots must start at (0, 0) with strictly increasing prices and non-decreasing volumes.
    static LobShape tabulated(std::vector<ShapeKnot> knots);

    ShapeKind kind() const noexcept { return kind_; }
    double kappa() const noexcept { return kappa_; }
    double gamma() const noexcept { return gamma_; }
    std::span<const ShapeKnot> knots() const noexcept { return knots_; }

    /// Total volume the book can absorb; +inf for unbounded books.
    double saturation_volume() const noexcept;

    double depth(double price) const;
    double deviation(double volume) const;
    double impact_cost(double volume) const;
    /// Cost in excess of the unaffected price of buying `amount` when `volume` is already displaced.
    double block_cost(double volume, double amount) const;

    std::string describe() const;

private:
    LobShape(ShapeKind kind, double kappa, double gamma, std::vector<ShapeKnot> knots);

    double tabulated_deviation(double volume) const;
    double tabulated_cost(double volume) const;
    void check_volume(double volume) const;

    ShapeKind kind_;
    double kappa_;
    double gamma_;
    std::vector<ShapeKnot> knots_;
};

struct A1Report {
    bool holds = true;
    double worst_margin = 0.0;  ///< min over samples of F(x) - b x^beta
    double worst_price = 0.0;
    std::string note;
};

/// Samples F on [a, a_max] and checks F(x) >= b x^beta. Advisory only; never throws for a valid shape.
A1Report validate_assumption_a1(const LobShape& shape, double b, double beta, double a,
                                double a_max = 100.0, int samples = 2000);

}  // namespace optexec
