#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pointqa/features.hpp"
#include "pointqa/models.hpp"
#include "pointqa/random.hpp"
#include "pointqa/scene_graph.hpp"

namespace fixtures {

inline pointqa::ObjectAnnotation object(const std::string& id, const std::string& name, pointqa::BoundingBox box,
                                        std::vector<std::string> attributes = {}) {
    return {id, {name}, box, std::move(attributes)};
}

inline pointqa::ImageAnnotation image(const std::string& id, std::vector<pointqa::ObjectAnnotation> objects,
                                      std::vector<pointqa::SourceQA> qas = {}, int w = 640, int h = 480) {
    pointqa::ImageAnnotation img;
    img.image_id = id;
    img.width = w;
    img.height = h;
    img.objects = std::move(objects);
    img.source_qas = std::move(qas);
    return img;
}

inline pointqa::BoundingBox random_box(pointqa::Rng& rng, int width, int height) {
    const int w = 1 + static_cast<int>(pointqa::uniform_index(rng, static_cast<std::size_t>(width / 2)));
    const int h = 1 + static_cast<int>(pointqa::uniform_index(rng, static_cast<std::size_t>(height / 2)));
    const int x = static_cast<int>(pointqa::uniform_index(rng, static_cast<std::size_t>(width - w + 1)));
    const int y = static_cast<int>(pointqa::uniform_index(rng, static_cast<std::size_t>(height - h + 1)));
    return {double(x), double(y), double(w), double(h)};
}

inline pointqa::ProposalSet random_proposals(pointqa::Rng& rng, std::size_t p, int d, int width = 64, int height = 48,
                                             const std::string& id = "img") {
    pointqa::ProposalSet s;
    s.image_id = id;
    s.features.resize(static_cast<Eigen::Index>(p), d);
    for (std::size_t i = 0; i < p; ++i) {
        s.boxes.push_back(random_box(rng, width, height));
        s.scores.push_back(static_cast<float>(pointqa::uniform_unit(rng)));
        for (int c = 0; c < d; ++c) s.features(static_cast<Eigen::Index>(i), c) = static_cast<float>(pointqa::standard_normal(rng));
    }
    return s;
}

// Small model configuration for numerical tests.
inline pointqa::ModelConfig tiny_config(pointqa::Architecture arch, pointqa::Streams streams, int feature_dim = 4,
                                        int vocab = 12, std::size_t answers = 3, std::uint64_t seed = 5) {
    pointqa::ModelConfig c;
    c.architecture = arch;
    c.streams = streams;
    c.d = 8;
    c.heads = 2;
    c.mcan_layers = 1;
    c.language_layers = 1;
    c.image_layers = 1;
    c.point_layers = 1;
    c.cross_layers = 1;
    c.feature_dim = feature_dim;
    c.vocab_size = vocab;
    c.num_regions = 16;
    for (std::size_t i = 0; i < answers; ++i) c.answers.push_back("a" + std::to_string(i));
    c.seed = seed;
    return c;
}

inline pointqa::RegionInput random_regions(pointqa::Rng& rng, std::size_t rows, int width) {
    pointqa::RegionInput r;
    r.features.resize(static_cast<Eigen::Index>(rows), width);
    for (Eigen::Index i = 0; i < r.features.size(); ++i) r.features.data()[i] = pointqa::standard_normal(rng);
    r.features.col(width - 1).setZero();
    r.mask.assign(rows, true);
    for (std::size_t i = 0; i < rows; ++i) r.boxes.push_back(random_box(rng, 64, 48));
    return r;
}

inline pointqa::ModelInput random_input(pointqa::Rng& rng, const pointqa::ModelConfig& c, std::size_t image_rows = 5,
                                        std::size_t point_rows = 3, std::size_t tokens = 4) {
    pointqa::ModelInput in;
    for (std::size_t i = 0; i < tokens; ++i) {
        in.tokens.push_back(3 + static_cast<int>(pointqa::uniform_index(rng, static_cast<std::size_t>(c.vocab_size - 3))));
    }
    in.image = random_regions(rng, image_rows, c.region_dim());
    in.point = random_regions(rng, point_rows, c.region_dim());
    return in;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pointqa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixtures
