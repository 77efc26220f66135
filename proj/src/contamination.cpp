#include "robreg/contamination.hpp"

#include <algorithm>
#include <numeric>

namespace robreg {

AdversarySpec leverage_plant(double eps, double magnitude, double slope, std::uint64_t seed) {
    AdversarySpec a;
    a.strategy = AdversarySpec::Strategy::LeveragePlant;
    a.epsilon = eps;
    a.magnitude = magnitude;
    a.slope = slope;
    a.seed = seed;
    return a;
}

AdversarySpec label_flip(double eps, double scale, std::uint64_t seed) {
    AdversarySpec a;
    a.strategy = AdversarySpec::Strategy::LabelFlip;
    a.epsilon = eps;
    a.scale = scale;
    a.seed = seed;
    return a;
}

AdversarySpec oblivious_replace(double eps, Vec x0, double y0, std::uint64_t seed) {
    AdversarySpec a;
    a.strategy = AdversarySpec::Strategy::ObliviousReplace;
    a.epsilon = eps;
    a.point_x = std::move(x0);
    a.point_y = y0;
    a.seed = seed;
    return a;
}

AdversarySpec huber_mixture(double eps, RegressionInstance q, std::uint64_t seed) {
    AdversarySpec a;
    a.strategy = AdversarySpec::Strategy::HuberMixture;
    a.epsilon = eps;
    a.huber_q = std::move(q);
    a.seed = seed;
    return a;
}

int ContaminationResult::replaced_count() const {
    int c = 0;
    for (auto v : mask) c += v;
    return c;
}

namespace {

/// Floyd's algorithm: k distinct indices from [0, n), deterministic by seed.
std::vector<int> sample_indices(int n, int k, Rng& rng) {
    std::vector<int> chosen;
    std::vector<bool> used(n, false);
    for (int j = n - k; j < n; ++j) {
        int t = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(j + 1));
        if (used[t]) t = j;
        used[t] = true;
        chosen.push_back(t);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace

ContaminationResult contaminate(const Dataset& ds, const AdversarySpec& adv) {
    int n = ds.n();
    if (n < 2) throw std::invalid_argument("contaminate requires n >= 2");
    if (adv.epsilon < 0.0 || adv.epsilon >= 0.5)
        throw std::invalid_argument("contaminate requires 0 <= eps < 1/2");
    int budget = static_cast<int>(std::floor(adv.epsilon * n));

    ContaminationResult out;
    out.corrupted = ds;
    out.mask.assign(n, 0);
    out.strategy = adv.strategy;
    if (budget == 0) {
        if (out.corrupted.meta) out.corrupted.meta->corruption_mask = out.mask;
        return out;
    }

    Rng rng(adv.seed);
    std::vector<int> idx = sample_indices(n, budget, rng);
    for (int i : idx) out.mask[static_cast<std::size_t>(i)] = 1;

    switch (adv.strategy) {
        case AdversarySpec::Strategy::HuberMixture: {
            if (!adv.huber_q) throw std::invalid_argument("HuberMixture requires a Q instance");
            Dataset q = sample_instance(*adv.huber_q, budget, rng.next_u64());
            for (int j = 0; j < budget; ++j) {
                out.corrupted.X.row(idx[j]) = q.X.row(j);
                out.corrupted.y(idx[j]) = q.y(j);
            }
            break;
        }
        case AdversarySpec::Strategy::LeveragePlant: {
            Vec u = adv.direction ? adv.direction->normalized()
                                  : Vec::Unit(ds.d(), ds.d() - 1);
            if (u.size() != ds.d()) throw std::invalid_argument("direction dimension mismatch");
            Vec x = adv.magnitude * u;
            double y = adv.slope * adv.magnitude;
            for (int i : idx) {
                out.corrupted.X.row(i) = x.transpose();
                out.corrupted.y(i) = y;
            }
            break;
        }
        case AdversarySpec::Strategy::LabelFlip: {
            for (int i : idx) out.corrupted.y(i) = -adv.scale * ds.y(i);
            break;
        }
        case AdversarySpec::Strategy::ObliviousReplace: {
            if (!adv.point_x || adv.point_x->size() != ds.d())
                throw std::invalid_argument("ObliviousReplace requires a point of dimension d");
            for (int i : idx) {
                out.corrupted.X.row(i) = adv.point_x->transpose();
                out.corrupted.y(i) = adv.point_y;
            }
            break;
        }
    }
    if (out.corrupted.meta) out.corrupted.meta->corruption_mask = out.mask;
    return out;
}

}  // namespace robreg
