#include "pointqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pointqa/errors.hpp"

namespace pointqa {

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t pos, int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > in.size()) throw CorruptFeature("truncated checkpoint", in.size());
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const QuestionVocabulary& vocab) {
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& p : model.parameters()) {
        tensors.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
        offset += static_cast<std::size_t>(p.value.size()) * 4;
    }
    const nlohmann::json header = {{"config", to_json(model.config())},
                                   {"question_vocabulary", vocab.words()},
                                   {"seed", model.config().seed},
                                   {"tensors", tensors}};
    const std::string text = header.dump();
    std::vector<std::uint8_t> out{'P', 'Q', 'C', 'K'};
    put_le(out, kCheckpointVersion, 2);
    put_le(out, text.size(), 4);
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + offset);
    for (const auto& p : model.parameters()) {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(p.value.data()[i])), 4);
        }
    }
    return out;
}

LoadedModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), "PQCK", 4) != 0) throw CorruptFeature("bad checkpoint magic", 0);
    const auto version = get_le(bytes, 4, 2);
    if (version != kCheckpointVersion) throw CorruptFeature("unsupported checkpoint version " + std::to_string(version), 4);
    const auto header_len = static_cast<std::size_t>(get_le(bytes, 6, 4));
    if (10 + header_len > bytes.size()) throw CorruptFeature("truncated checkpoint header", bytes.size());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + static_cast<long>(header_len));
    } catch (const nlohmann::json::exception&) {
        throw CorruptFeature("unreadable checkpoint header", 10);
    }
    const std::size_t data = 10 + header_len;
    LoadedModel out;
    out.vocabulary = QuestionVocabulary(header.at("question_vocabulary").get<std::vector<std::string>>());
    out.model = make_model(model_config_from_json(header.at("config")));
    auto& params = out.model->parameters();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size()) throw CorruptFeature("checkpoint tensor count does not match the model", 10);
    for (const auto& entry : tensors) {
        auto& p = params[params.index(entry.at("name").get<std::string>())];
        const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
        const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
        if (rows != p.value.rows() || cols != p.value.cols()) {
            throw CorruptFeature("shape mismatch for tensor " + p.name, 10);
        }
        std::size_t pos = data + entry.at("offset").get<std::size_t>();
        for (Eigen::Index i = 0; i < p.value.size(); ++i, pos += 4) {
            p.value.data()[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, pos, 4)));
        }
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const QuestionVocabulary& vocab) {
    const auto bytes = encode_checkpoint(model, vocab);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace pointqa
