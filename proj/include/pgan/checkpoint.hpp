#pragma once

#include <cstdint>
#include <string>

#include "pgan/model.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

class Adam;

struct CheckpointMeta {
    int epoch = 0;
    std::uint64_t seed = 0;
    std::string variant;
    ModelConfig config;
};

/// Flat map of parameter paths to shape-tagged little-endian float32 arrays
/// behind a JSON header (config, epoch, seed). Adam state rides along when
/// given so runs can resume.
void save_checkpoint(const std::string& path, PganModel& model,
                     const CheckpointMeta& meta, const Adam* adam = nullptr);

/// Fills an already-constructed model (resume path). Adam state is restored
/// when both the file has it and adam is non-null.
CheckpointMeta load_checkpoint(const std::string& path, PganModel& model,
                               Adam* adam = nullptr);

/// Reconstructs the model from the stored config (evaluation path).
CheckpointMeta load_model(const std::string& path, PganModel& model);

std::uint64_t file_fnv1a(const std::string& path);

/// float32 blob plus JSON sidecar (count, dimension, role, checkpoint hash).
void export_embeddings(const std::string& path_prefix, const Mat& emb,
                       const std::string& role, std::uint64_t checkpoint_hash);
Mat import_embeddings(const std::string& path_prefix);

} // namespace pgan
