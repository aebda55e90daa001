#include <doctest.h>

#include <set>

#include "persona/errors.hpp"
#include "persona/personas.hpp"
#include "support/fixtures.hpp"

using namespace persona;
using persona::testing::shipped;

TEST_CASE("all sixteen types in table order") {
    const auto& t = all_types();
    CHECK(t[0].code() == "ESTP");
    CHECK(t[6].code() == "ENFJ");
    CHECK(t[8].code() == "ISTJ");
    CHECK(t[15].code() == "INTP");
    std::set<std::string> codes;
    for (const auto& m : t) codes.insert(m.code());
    CHECK(codes.size() == 16);
}

TEST_CASE("MbtiType parsing") {
    CHECK(MbtiType::parse("intj").code() == "INTJ");
    CHECK_THROWS_AS(MbtiType::parse("ABCD"), InvalidSpec);
    CHECK_THROWS_AS(MbtiType::parse("INT"), InvalidSpec);
    CHECK_FALSE(MbtiType::try_parse("XNTJ").has_value());
    const auto t = MbtiType::from_poles({true, false, true, false});
    CHECK(t.code() == "ENTP");
    CHECK(t.is_first_pole(Axis::EI));
    CHECK_FALSE(t.is_first_pole(Axis::SN));
}

TEST_CASE("targets") {
    CHECK(all_targets(Instrument::MBTI).size() == 16);
    CHECK(all_targets(Instrument::BFI).size() == 5);
    CHECK(target_name(parse_target(Instrument::BFI, "n")) == "Neuroticism");
    CHECK(target_instrument(parse_target(Instrument::MBTI, "ENFJ")) == Instrument::MBTI);
    CHECK_THROWS(parse_target(Instrument::MBTI, "Openness"));
}

TEST_CASE("shipped catalog is complete") {
    const auto& p = shipped().personas;
    for (const auto& t : all_types()) {
        const auto& prof = p.traits_for(t);
        CHECK(prof.features.size() == kTraitFeatureNames.size());
        for (std::size_t i = 0; i < kTraitFeatureNames.size(); ++i)
            CHECK(prof.features[i].name == kTraitFeatureNames[i]);
        CHECK(p.roles_for(t).size() == 3);
    }
    for (Factor f : kFactors) {
        CHECK_FALSE(p.profile_for(f).conceptual_definition.empty());
        CHECK(p.roles_for(f).size() == 3);
    }
    CHECK(p.role_catalog().size() >= 100);
}

TEST_CASE("role triples") {
    const auto& p = shipped().personas;
    const Target enfj = MbtiType::parse("ENFJ");
    CHECK(p.roles_for(enfj) == std::array<std::string, 3>{"Teacher", "Counselor", "HR Manager"});
    CHECK(p.role_allowed(enfj, "Counselor"));
    CHECK_FALSE(p.role_allowed(enfj, "Plumber"));
    CHECK(p.role_allowed(Factor::Neuroticism, "Artist"));
}

TEST_CASE("reference text") {
    const auto& p = shipped().personas;
    const auto text = p.reference_text(MbtiType::parse("INTJ"));
    CHECK(text.rfind("General Traits: ", 0) == 0);
    CHECK(text.find("\nRelationships: ") != std::string::npos);
    const auto f = p.reference_text(Factor::Neuroticism);
    CHECK(f.rfind("Verbal labels: Neuroticism", 0) == 0);
}

TEST_CASE("catalog schema errors") {
    auto j = nlohmann::json::parse(testing::read_file(testing::data_dir() / "personas.json"));
    SUBCASE("missing type") {
        j["types"].erase(3);
        CHECK_THROWS(PersonaCatalog::parse(j));
    }
    SUBCASE("wrong schema tag") {
        j["schema"] = "something-else";
        CHECK_THROWS_AS(PersonaCatalog::parse(j), SchemaError);
    }
}
