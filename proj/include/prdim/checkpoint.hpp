#pragma once

#include <optional>
#include <string>

#include "prdim/dataset.hpp"
#include "prdim/diffusion.hpp"
#include "prdim/em.hpp"
#include "prdim/recognizer.hpp"

namespace prdim {

// Everything needed to impute new data with a trained pair: both networks,
// the schedule parameters, the train normalization stats, and the sampling
// part of the EM configuration. Serialized as a single versioned JSON
// document; weights round-trip exactly.
struct Checkpoint {
    Denoiser denoiser;
    PatternRecognizer recognizer;
    NormStats stats;
    std::size_t schedule_steps = 50;
    double beta_min = 1e-4;
    double beta_max = 0.5;
    ScheduleKind schedule_kind = ScheduleKind::quadratic;
    std::optional<AxisMeta> axis_meta;
    EmConfig em;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace prdim
