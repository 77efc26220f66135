#pragma once

#include "robreg/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace robreg {

/// Replaces exactly floor(eps * n) rows with adversarial points. The count is
/// deterministic, not binomial, so test contracts can be exact.
struct AdversarySpec {
    enum class Strategy { HuberMixture, LeveragePlant, LabelFlip, ObliviousReplace };

    Strategy strategy = Strategy::LeveragePlant;
    double epsilon = 0.0;
    std::uint64_t seed = 0;

    // HuberMixture: replacements drawn i.i.d. from Q with labels from q_theta.
    std::optional<RegressionInstance> huber_q;

    // LeveragePlant: replaced rows set to magnitude * u with label slope * magnitude.
    double magnitude = 1.0;
    double slope = -1.0;
    std::optional<Vec> direction;  // defaults to the last coordinate axis

    // LabelFlip: y <- -scale * y on replaced rows.
    double scale = 1.0;

    // ObliviousReplace: all replaced rows set to this constant point.
    std::optional<Vec> point_x;
    double point_y = 0.0;
};

AdversarySpec leverage_plant(double eps, double magnitude, double slope, std::uint64_t seed = 0);
AdversarySpec label_flip(double eps, double scale, std::uint64_t seed = 0);
AdversarySpec oblivious_replace(double eps, Vec x0, double y0, std::uint64_t seed = 0);
AdversarySpec huber_mixture(double eps, RegressionInstance q, std::uint64_t seed = 0);

struct ContaminationResult {
    Dataset corrupted;
    std::vector<std::uint8_t> mask;  // 1 on replaced indices
    AdversarySpec::Strategy strategy;
    int replaced_count() const;
};

ContaminationResult contaminate(const Dataset& ds, const AdversarySpec& adv);

}  // namespace robreg
