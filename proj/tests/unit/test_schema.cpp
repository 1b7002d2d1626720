#include <doctest.h>

#include <set>

#include "htp/error.hpp"
#include "htp/schema.hpp"
#include "support/scenarios.hpp"

using namespace htp;
using htp::testing::default_schema;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

Json tiny_schema() {
    return Json::parse(R"({
      "version": "tiny/1",
      "categories": [
        {"name": "house", "leaves": [{"name": "present", "type": "boolean"}],
         "groups": [{"name": "roof", "leaves": [{"name": "style", "type": "enum", "values": ["pitched", "flat"]}]}]}
      ]})");
}

}  // namespace

TEST_CASE("shipped schema has at least 150 unique typed leaves") {
    const auto& schema = default_schema();
    CHECK(schema.leaf_count() >= 150);
    CHECK(schema.reconstruction());
    CHECK_FALSE(schema.version().empty());
    std::set<std::string> paths;
    for (const auto& leaf : schema.leaves()) {
        CHECK(paths.insert(leaf.path).second);
        CHECK(schema.find(leaf.path) == &leaf);
        if (leaf.type == LeafType::Enum) CHECK_FALSE(leaf.values.empty());
    }
    CHECK(paths.size() == schema.leaf_count());
    const std::set<std::string> categories(schema.categories().begin(), schema.categories().end());
    for (const char* c : {"line_quality", "spatial_layout", "proportions", "house", "tree", "person",
                          "special_symbols", "omissions"}) {
        CHECK(categories.contains(c));
    }
}

TEST_CASE("shipped schema covers the named drawing features") {
    const auto& schema = default_schema();
    for (const char* path : {"house.door.present", "house.windows.count", "house.roof.style", "house.chimney.present",
                             "house.smoke.present", "house.path.present", "tree.trunk.width", "tree.crown.shape",
                             "tree.roots.present", "tree.fruit.present", "tree.scars.present", "person.head.present",
                             "person.face.expression", "person.neck.present", "person.hands.present",
                             "person.fingers.present", "person.feet.present", "person.posture.stance",
                             "special_symbols.sun.present", "special_symbols.clouds.present",
                             "special_symbols.swing.present", "special_symbols.bench.present",
                             "special_symbols.roller_shoes.present", "omissions.door"}) {
        CHECK_MESSAGE(schema.find(path) != nullptr, path);
    }
}

TEST_CASE("validation of observation values") {
    const auto& schema = default_schema();

    SUBCASE("an empty record conforms") { CHECK(validate_observation(Json::object(), schema).empty()); }

    SUBCASE("conformant values") {
        const Json values{{"house.structure.complete", true},
                          {"tree.season", "winter"},
                          {"tree.coloring", "monochrome"},
                          {"person.rendering.style", "stick_figure"},
                          {"house.windows.count", 3},
                          {"line_quality.note", "firm strokes"}};
        CHECK(validate_observation(values, schema).empty());
    }

    SUBCASE("a boolean leaf given a number") {
        const auto v = validate_observation(Json{{"house.chimney.present", 1}}, schema);
        REQUIRE(v.size() == 1);
        CHECK(v[0].path == "house.chimney.present");
        CHECK(v[0].kind == ViolationKind::TypeMismatch);
    }

    SUBCASE("a misspelled path") {
        const auto v = validate_observation(Json{{"house.rooff.style", "pitched"}}, schema);
        REQUIRE(v.size() == 1);
        CHECK(v[0].path == "house.rooff.style");
        CHECK(v[0].kind == ViolationKind::UnknownPath);
    }

    SUBCASE("a group path is not a leaf") {
        const auto v = validate_observation(Json{{"house.roof", "pitched"}}, schema);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == ViolationKind::UnknownPath);
    }

    SUBCASE("enum members and numeric ranges") {
        auto v = validate_observation(Json{{"tree.season", "monsoon"}}, schema);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == ViolationKind::TypeMismatch);
        v = validate_observation(Json{{"spatial_layout.page_coverage", 140}}, schema);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == ViolationKind::OutOfRange);
        v = validate_observation(Json{{"spatial_layout.page_coverage", "most"}}, schema);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == ViolationKind::TypeMismatch);
    }

    SUBCASE("every violation is listed") {
        const Json values{{"house.rooff.style", "pitched"}, {"house.chimney.present", "yes"}, {"tree.present", true},
                          {"person.hats", true}};
        const auto v = validate_observation(values, schema);
        REQUIRE(v.size() == 3);
        const auto text = describe(v);
        CHECK(text.find("house.rooff.style") != std::string::npos);
        CHECK(text.find("house.chimney.present") != std::string::npos);
        CHECK(text.find("person.hats") != std::string::npos);
    }

    SUBCASE("non-object values") { CHECK(validate_observation(Json::array(), schema).size() == 1); }
}

TEST_CASE("schema definitions are checked on load") {
    const auto schema = ObservationSchema::from_json(tiny_schema());
    CHECK(schema.leaf_count() == 2);
    CHECK(schema.find("house.roof.style") != nullptr);

    auto duplicate = tiny_schema();
    duplicate["categories"][0]["leaves"].push_back(Json{{"name", "present"}, {"type", "boolean"}});
    CHECK(kind_of([&] { ObservationSchema::from_json(duplicate); }) == ErrorKind::DuplicateId);

    auto untyped = tiny_schema();
    untyped["categories"][0]["leaves"].push_back(Json{{"name", "colour"}});
    CHECK(kind_of([&] { ObservationSchema::from_json(untyped); }) == ErrorKind::SchemaViolation);

    auto bad_type = tiny_schema();
    bad_type["categories"][0]["leaves"].push_back(Json{{"name", "colour"}, {"type", "rgb"}});
    CHECK(kind_of([&] { ObservationSchema::from_json(bad_type); }) == ErrorKind::SchemaViolation);

    CHECK(kind_of([] { ObservationSchema::load("/nonexistent/schema.json"); }) == ErrorKind::Config);
}
