#include "pointqa/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pointqa/errors.hpp"
#include "pointqa/random.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test_dev: return "test_dev";
        case Split::test_final: return "test_final";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test_dev") return Split::test_dev;
    if (name == "test_final") return Split::test_final;
    if (name == "test") return Split::test;
    throw ContractError("unknown split '" + name + "'");
}

nlohmann::json to_json(const PointQAInstance& inst) {
    nlohmann::json meta{{"task", inst.meta.task}, {"object_class", inst.meta.object_class}};
    if (inst.meta.category) meta["category"] = *inst.meta.category;
    if (inst.meta.supercategory) meta["supercategory"] = *inst.meta.supercategory;
    if (inst.meta.question_form) meta["question_form"] = *inst.meta.question_form;
    if (inst.meta.answer_set) meta["answer_set"] = *inst.meta.answer_set;
    if (inst.meta.synthesized) meta["synthesized"] = *inst.meta.synthesized;
    if (inst.meta.source_qa_id) meta["source_qa_id"] = *inst.meta.source_qa_id;

    nlohmann::json j{{"qa_id", inst.qa_id},   {"image_id", inst.image_id}, {"question", inst.question},
                     {"answer", inst.answer}, {"split", to_string(inst.split)}, {"meta", std::move(meta)}};
    if (inst.point) j["point"] = *inst.point;
    if (inst.gt_box) j["gt_box"] = *inst.gt_box;
    return j;
}

PointQAInstance instance_from_json(const nlohmann::json& j) {
    PointQAInstance inst;
    inst.qa_id = j.at("qa_id").get<std::string>();
    inst.image_id = j.at("image_id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    inst.answer = j.at("answer").get<std::string>();
    inst.split = parse_split(j.at("split").get<std::string>());
    if (auto it = j.find("point"); it != j.end() && !it->is_null()) inst.point = it->get<Point>();
    if (auto it = j.find("gt_box"); it != j.end() && !it->is_null()) inst.gt_box = it->get<BoundingBox>();
    const auto& m = j.at("meta");
    inst.meta.task = m.at("task").get<std::string>();
    inst.meta.object_class = m.value("object_class", std::string{});
    if (auto it = m.find("category"); it != m.end()) inst.meta.category = it->get<std::string>();
    if (auto it = m.find("supercategory"); it != m.end()) inst.meta.supercategory = it->get<std::string>();
    if (auto it = m.find("question_form"); it != m.end()) inst.meta.question_form = it->get<std::string>();
    if (auto it = m.find("answer_set"); it != m.end()) inst.meta.answer_set = it->get<std::vector<std::string>>();
    if (auto it = m.find("synthesized"); it != m.end()) inst.meta.synthesized = it->get<bool>();
    if (auto it = m.find("source_qa_id"); it != m.end()) inst.meta.source_qa_id = it->get<std::string>();
    return inst;
}

Dataset read_instances(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    Dataset out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(instance_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), 1);
        }
    }
    return out;
}

void write_instances(const std::filesystem::path& path, const Dataset& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& inst : instances) out << to_json(inst).dump() << '\n';
}

std::vector<std::filesystem::path> write_split_files(const std::filesystem::path& dir, const std::string& prefix,
                                                     const Dataset& dataset, const std::vector<Split>& splits) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (Split s : splits) {
        auto path = dir / (prefix + "." + to_string(s) + ".jsonl");
        write_instances(path, filter_split(dataset, s));
        written.push_back(path);
    }
    return written;
}

Dataset read_split_files(const std::filesystem::path& dir, const std::string& prefix) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (text::starts_with(name, prefix + ".") && text::ends_with(name, ".jsonl")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Dataset out;
    for (const auto& f : files) {
        auto part = read_instances(f);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

const std::vector<SplitFraction>& local_split_fractions() {
    static const std::vector<SplitFraction> f = {
        {Split::train, 0.7}, {Split::val, 0.1}, {Split::test_dev, 0.1}, {Split::test_final, 0.1}};
    return f;
}

const std::vector<SplitFraction>& default_split_fractions() {
    static const std::vector<SplitFraction> f = {{Split::train, 0.8}, {Split::val, 0.1}, {Split::test, 0.1}};
    return f;
}

void validate_fractions(const std::vector<SplitFraction>& fractions) {
    if (fractions.empty()) throw ConfigError("no split fractions");
    double sum = 0;
    for (const auto& f : fractions) {
        if (!(f.fraction >= 0)) throw ConfigError("negative split fraction");
        sum += f.fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::map<std::string, Split> assign_splits(const std::vector<std::string>& image_ids,
                                           const std::vector<SplitFraction>& fractions, std::uint64_t seed) {
    validate_fractions(fractions);
    std::vector<std::string> order = image_ids;
    Rng rng(seed);
    shuffle(order, rng);

    const std::size_t n = order.size();
    std::vector<std::size_t> counts(fractions.size());
    std::vector<double> remainder(fractions.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = fractions[i].fraction * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> by_remainder(fractions.size());
    std::iota(by_remainder.begin(), by_remainder.end(), 0);
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[by_remainder[k % by_remainder.size()]];

    std::map<std::string, Split> out;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        for (std::size_t c = 0; c < counts[i]; ++c) out[order[pos++]] = fractions[i].split;
    }
    return out;
}

Dataset filter_split(const Dataset& data, Split split) {
    Dataset out;
    std::copy_if(data.begin(), data.end(), std::back_inserter(out),
                 [split](const PointQAInstance& i) { return i.split == split; });
    return out;
}

}  // namespace pointqa
