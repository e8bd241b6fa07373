#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "pointqa/errors.hpp"
#include "pointqa/scene_graph.hpp"
#include "pointqa/text.hpp"

using namespace pointqa;

namespace {

std::filesystem::path write_lines(const std::string& name, const std::vector<std::string>& lines) {
    const auto path = fixtures::temp_dir("sg_" + name) / "annotations.jsonl";
    std::ofstream out(path);
    for (const auto& l : lines) out << l << "\n";
    return path;
}

std::string record(const std::string& id, const std::string& objects = R"([{"object_id":"o1","names":["Shirt "],"box":{"x":0,"y":0,"w":10,"h":10},"attributes":["Red","red"]}])") {
    return R"({"image_id":")" + id + R"(","width":100,"height":80,"objects":)" + objects +
           R"(,"source_qas":[{"qa_id":")" + id + R"(-q","question":"What color is the shirt?","answer":"red"}]})";
}

AnnotationStore store_with_attributes(const std::vector<std::pair<std::string, int>>& counts) {
    std::vector<ObjectAnnotation> objects;
    int n = 0;
    for (const auto& [attr, count] : counts) {
        for (int i = 0; i < count; ++i) {
            objects.push_back(fixtures::object("o" + std::to_string(n), "ball", {double(n % 60), 0, 1, 1}, {attr}));
            ++n;
        }
    }
    return AnnotationStore({fixtures::image("img", objects)});
}

const std::map<std::string, std::string> kCategories = {
    {"red", "color"}, {"yellow", "color"}, {"round", "shape"}, {"large", "size"}, {"running", "action"}};

}  // namespace

TEST_SUITE("text") {
    TEST_CASE("normalization") {
        CHECK(text::normalize("  Red   SHIRT ") == "red shirt");
        CHECK(text::word_tokens("How many people, are there?") ==
              std::vector<std::string>{"how", "many", "people", "are", "there"});
        CHECK(text::capitalize("is this") == "Is this");
    }

    TEST_CASE("singular and plural forms") {
        for (const std::string w : {"people", "men", "women", "children", "sheep", "trucks", "boxes", "benches",
                                    "puppies", "cars"}) {
            CHECK(text::singularize(w) == oracle::singular(w));
        }
        CHECK(text::singularize("buses") == "bus");
        CHECK(text::singularize("glasses") == "glasses");
        CHECK(text::singularize("jeans") == "jeans");
        CHECK(text::pluralize("person") == "people");
        CHECK(text::pluralize("car") == "cars");
        CHECK(text::pluralize("bus") == "buses");
        CHECK(text::pluralize("puppy") == "puppies");
        CHECK(text::pluralize("sheep") == "sheep");
    }

    TEST_CASE("count answers") {
        CHECK(text::parse_count("3") == 3);
        CHECK(text::parse_count("three") == 3);
        CHECK(text::parse_count(" 10 ") == 10);
        CHECK_FALSE(text::parse_count("many").has_value());
    }
}

TEST_SUITE("scene_graph") {
    TEST_CASE("loads well-formed records and normalizes text") {
        const auto path = write_lines("ok", {record("b"), record("a"), record("c")});
        const auto store = load_annotations(path);
        CHECK(store.size() == 3);
        CHECK(store.skipped() == 0);
        CHECK(store.images()[0].image_id == "a");
        const auto& obj = store.at("b").objects.at(0);
        CHECK(obj.canonical_name() == "shirt");
        CHECK(obj.attributes == std::vector<std::string>{"red"});
    }

    TEST_CASE("a record missing objects is skipped and counted") {
        const auto path =
            write_lines("missing", {R"({"image_id":"x","width":10,"height":10,"source_qas":[]})"});
        const auto store = load_annotations(path);
        CHECK(store.size() == 0);
        CHECK(store.skipped() == 1);
    }

    TEST_CASE("empty file gives an empty store") {
        CHECK(load_annotations(write_lines("empty", {})).empty());
    }

    TEST_CASE("more than 10% malformed raises corrupt input") {
        std::vector<std::string> lines;
        for (int i = 0; i < 8; ++i) lines.push_back(record("img" + std::to_string(i)));
        lines.push_back("{not json");
        lines.push_back(R"({"image_id":"y"})");
        CHECK_THROWS_AS(load_annotations(write_lines("corrupt", lines)), CorruptInput);
        lines.pop_back();
        lines.push_back(record("img9"));
        const auto store = load_annotations(write_lines("tolerable", lines));
        CHECK(store.size() == 9);
        CHECK(store.skipped() == 1);
    }

    TEST_CASE("unreadable path is an I/O error") {
        CHECK_THROWS_AS(load_annotations("/nonexistent/annotations.jsonl"), IoError);
    }

    TEST_CASE("out-of-bounds boxes and duplicate object ids are malformed") {
        const auto oob = record("a", R"([{"object_id":"o1","names":["cup"],"box":{"x":95,"y":0,"w":10,"h":10},"attributes":[]}])");
        const auto dup = record("b", R"([{"object_id":"o1","names":["cup"],"box":{"x":0,"y":0,"w":1,"h":1},"attributes":[]},{"object_id":"o1","names":["cup"],"box":{"x":2,"y":0,"w":1,"h":1},"attributes":[]}])");
        CHECK(load_annotations(write_lines("oob", {oob})).skipped() == 1);
        CHECK(load_annotations(write_lines("dup", {dup})).skipped() == 1);
    }

    TEST_CASE("two loads are identical") {
        const auto path = write_lines("twice", {record("b"), record("a")});
        const auto s1 = load_annotations(path);
        const auto s2 = load_annotations(path);
        REQUIRE(s1.size() == s2.size());
        for (std::size_t i = 0; i < s1.size(); ++i) CHECK(to_json(s1.images()[i]) == to_json(s2.images()[i]));
    }

    TEST_CASE("taxonomy drops size and keeps the top_k") {
        const auto store = store_with_attributes({{"red", 50}, {"round", 10}, {"large", 8}});
        const auto tax = build_taxonomy(store, 3, {}, kCategories);
        CHECK(tax.category("red") == AttributeCategory::color);
        CHECK(tax.category("round") == AttributeCategory::shape);
        CHECK_FALSE(tax.category("large").has_value());
        CHECK(tax.dropped_size == std::vector<std::string>{"large"});
    }

    TEST_CASE("taxonomy collapses synonyms") {
        const auto store = store_with_attributes({{"blonde", 4}, {"yellow", 2}});
        const auto tax = build_taxonomy(store, 10, {{"blonde", "yellow"}}, kCategories);
        CHECK(tax.canonical("blonde") == "yellow");
        CHECK(tax.category("yellow") == AttributeCategory::color);
    }

    TEST_CASE("taxonomy reports uncategorized attributes") {
        const auto store = store_with_attributes({{"red", 3}, {"wooden", 2}});
        const auto tax = build_taxonomy(store, 10, {}, kCategories);
        CHECK(tax.uncategorized == std::vector<std::string>{"wooden"});
        CHECK_FALSE(tax.category("wooden").has_value());
    }

    TEST_CASE("taxonomy preconditions and empty store") {
        CHECK_THROWS_AS(build_taxonomy(AnnotationStore{}, 0, {}, kCategories), ContractError);
        CHECK(build_taxonomy(AnnotationStore{}, 5, {}, kCategories).empty());
    }

    TEST_CASE("kept attributes are at least as frequent as cut ones") {
        Rng rng(3);
        const std::vector<std::string> names = {"red", "yellow", "round", "running", "large", "blue", "green"};
        std::map<std::string, std::string> cats = kCategories;
        cats["blue"] = "color";
        cats["green"] = "color";
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::pair<std::string, int>> counts;
            for (const auto& n : names) counts.emplace_back(n, 1 + static_cast<int>(uniform_index(rng, 6)));
            const auto store = store_with_attributes(counts);
            const std::size_t k = 1 + uniform_index(rng, names.size());
            const auto tax = build_taxonomy(store, k, {}, cats);
            std::map<std::string, int> freq(counts.begin(), counts.end());
            std::set<std::string> kept(tax.dropped_size.begin(), tax.dropped_size.end());
            for (const auto& [a, c] : tax.category_of) kept.insert(a);
            CHECK(kept.size() == std::min(k, names.size()));
            for (const auto& in : kept) {
                for (const auto& [out, c] : freq) {
                    if (!kept.count(out)) CHECK(freq[in] >= c);
                }
            }
            const bool dropped =
                std::find(tax.dropped_size.begin(), tax.dropped_size.end(), "large") != tax.dropped_size.end();
            CHECK_FALSE((dropped && tax.category("large").has_value()));
        }
    }
}
