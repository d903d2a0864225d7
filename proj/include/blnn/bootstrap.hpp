#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "blnn/encoder.hpp"
#include "blnn/errors.hpp"

namespace blnn {

/// Cosine schedule for the target decay rate, from t_base up to 1.
struct EmaSchedule {
    double t_base = 0.99;
    std::size_t total_steps = 0;
    std::size_t current_step = 0;
};

/// 1 - (1 - t_base) (cos(pi step / total) + 1) / 2; 1 when total is 0.
inline double ema_decay_at(const EmaSchedule& s) {
    if (s.total_steps == 0) return 1.0;
    if (s.current_step > s.total_steps) throw std::out_of_range("ema schedule step beyond total_steps");
    if (s.current_step == s.total_steps) return 1.0;
    if (s.current_step == 0) return s.t_base;
    const double x = static_cast<double>(s.current_step) / static_cast<double>(s.total_steps);
    return 1.0 - (1.0 - s.t_base) * (std::cos(std::numbers::pi * x) + 1.0) / 2.0;
}

/// target <- decay * target + (1 - decay) * online for every matrix of the
/// layer stack, running statistics included. Written as an increment so a
/// target equal to online stays bit-identical.
inline void ema_update(std::vector<GcnLayerParams>& target, std::vector<GcnLayerParams>& online, double decay) {
    auto t = EncoderState::layer_matrices(target, "t");
    auto o = EncoderState::layer_matrices(online, "t");
    if (t.size() != o.size()) throw DimensionError("ema_update: layer structure differs between target and online");
    for (std::size_t k = 0; k < t.size(); ++k) {
        Matrix& tm = *t[k].second;
        const Matrix& om = *o[k].second;
        if (t[k].first != o[k].first || !tm.same_shape(om))
            throw DimensionError("ema_update: shape mismatch at " + t[k].first + ": " + tm.shape() + " vs " + om.shape());
        if (decay == 1.0) continue;
        if (decay == 0.0) {
            tm = om;
            continue;
        }
        for (std::size_t q = 0; q < tm.size(); ++q)
            tm.data()[q] += (1.0 - decay) * (om.data()[q] - tm.data()[q]);
    }
}

inline void ema_update(EncoderState& s, double decay) { ema_update(s.target, s.online, decay); }

}  // namespace blnn
