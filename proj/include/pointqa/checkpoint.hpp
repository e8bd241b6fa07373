#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "pointqa/models.hpp"

namespace pointqa {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct LoadedModel {
    std::unique_ptr<Model> model;
    QuestionVocabulary vocabulary;
};

// "PQCK", u16 version, u32 header length, JSON header (config, vocabulary,
// tensor index name -> {shape, offset}), then little-endian f32 tensors.
std::vector<std::uint8_t> encode_checkpoint(const Model& model, const QuestionVocabulary& vocab);
LoadedModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const QuestionVocabulary& vocab);
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace pointqa
