#pragma once

#include "malfam/classifiers.hpp"

#include <filesystem>

namespace malfam {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON envelope:
///   {format_version, spec, schema_fingerprint, class_list, feature_count,
///    state, [task], [scaling], [feature_mask]}
/// Training time is not stored, so saving the same model twice gives
/// identical files.
/// Trees are flat arrays of [feature, threshold, left, right, distribution].
std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(std::string_view document);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace malfam
