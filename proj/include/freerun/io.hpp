#pragma once

// File formats.
//
// Dataset CSV: header `k,u1,...,uNu,y1,...,yNy`, one row per sample, comma separated,
// '.' decimal point. `k` counts samples from 1.
//
// Model file: a JSON document
//   {
//     "format": "freerun-model", "version": 1,
//     "orders": {"ny": 2, "nu": 2, "tau_d": 1},
//     "input_size": 4,
//     "layers": [{"size": 10, "activation": "tanh"}, {"size": 1, "activation": "identity"}],
//     "scalers": {"u_mean": [...], "u_scale": [...], "y_mean": [...], "y_scale": [...]},
//     "params": [...],            // flat layout of pack_params
//     "training": {...}           // free-form metadata: method, epochs, seed, final_objective
//   }
// Doubles are written with round-trip precision, so a reloaded model simulates bit-identically.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "freerun/dynmodel.hpp"
#include "json.hpp"

namespace freerun {

/// Throws DataError with the offending line and column on malformed input.
Dataset read_dataset_csv(std::istream& is, const std::string& source = "<stream>");
Dataset read_dataset_csv(const std::filesystem::path& path);

void write_dataset_csv(std::ostream& os, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// CSV of a signal matrix with header `k,<prefix>1,...`.
void write_series_csv(std::ostream& os, const MatrixXd& values, const std::string& prefix);

struct ModelFile {
  DynamicModel model;
  nlohmann::json training = nlohmann::json::object();
};

nlohmann::json model_to_json(const DynamicModel& model, const nlohmann::json& training = nlohmann::json::object());
/// Throws DataError when required fields are missing or inconsistent.
ModelFile model_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const DynamicModel& model,
                const nlohmann::json& training = nlohmann::json::object());
ModelFile load_model(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace freerun
