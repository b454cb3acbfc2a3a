#include <catch2/catch_amalgamated.hpp>

#include "phqmml/phq.hpp"
#include "testutil.hpp"

using namespace phqmml;

namespace {

// Published annotation examples, used as parsing fixtures.
const char* kTrainSet326 =
    "The participant primarily experiences occasional sleep issues and occasional low energy "
    "or fatigue.";
const char* kTrainSet330 =
    "The participant primarily experiences a mild reduction of interest or pleasure, "
    "occasional feelings of depression or hopelessness, mild sleep issues, mild fatigue, "
    "severe appetite issues, severe self-worth issues, and significant psychomotor agitation. "
    "These symptoms may be related to the various challenges they will face after graduation. "
    "If symptoms persist or worsen, it is recommended that the participant seek further "
    "evaluation and treatment from a psychiatrist or psychologist.";
const char* kTestSet311 =
    "The participant primarily experiences severe depressive symptoms, including a severe "
    "lack of interest or pleasure in activities, severe feelings of depression and "
    "hopelessness, severe sleep issues, severe fatigue, severe appetite disturbances, "
    "occasional self-worth issues, severe concentration difficulties, and occasional "
    "psychomotor agitation. These symptoms may be related to their current financial "
    "problems, lack of family support, past experiences with homelessness, ongoing struggles "
    "with PTSD, and current living environment. It is advised that the participant seek "
    "further evaluation and treatment from a psychiatrist or psychologist.";
const char* kDevSet367 =
    "The participant reported a history of depression and is currently undergoing treatment. "
    "They currently experience moderate to severe symptoms of depression, including a severe "
    "decrease in interest or pleasure in activities, severe feelings of depression and "
    "hopelessness, significant sleep disturbances, significant low energy, significant "
    "appetite changes, severe self-worth issues, severe concentration difficulties, and "
    "occasional psychomotor agitation or retardation. These symptoms may be related to the "
    "loss of their job, relocation and the need to re-establish their life, the breakup of a "
    "significant relationship, self-criticism, past treatment history, and current financial "
    "difficulties. It is advised that the participant seek further evaluation and treatment "
    "from a psychiatrist or psychologist.";

}  // namespace

TEST_CASE("total_score sums present items") {
    std::map<PhqItem, int> all_zero;
    for (PhqItem it : kPhqItems) all_zero[it] = 0;
    CHECK(total_score(all_zero) == 0);

    std::map<PhqItem, int> all_three;
    for (PhqItem it : kPhqItems) all_three[it] = 3;
    CHECK(total_score(all_three) == 24);

    CHECK(total_score({{PhqItem::SD, 2}, {PhqItem::LOE, 1}}) == 3);
    CHECK(total_score({}) == 0);

    CHECK_THROWS_AS(total_score({{PhqItem::SD, 4}}), ValidationError);
    CHECK_THROWS_AS(total_score({{PhqItem::NONE, 1}}), ValidationError);
}

TEST_CASE("severity_from_total follows the cut-point bands") {
    CHECK(severity_from_total(0) == SeverityLevel(0));
    CHECK_FALSE(severity_from_total(0).binary);
    CHECK(severity_from_total(10) == SeverityLevel(2));
    CHECK(severity_from_total(10).binary);
    CHECK(severity_from_total(24) == SeverityLevel(3));
    CHECK(severity_from_total(24).binary);

    CHECK(severity_from_total(4).value == 0);
    CHECK(severity_from_total(5).value == 1);
    CHECK(severity_from_total(9).value == 1);
    CHECK(severity_from_total(14).value == 2);
    CHECK(severity_from_total(15).value == 3);

    CHECK_THROWS_AS(severity_from_total(-1), ValidationError);
    CHECK_THROWS_AS(severity_from_total(25), ValidationError);

    int prev = 0;
    for (int t = 0; t <= 24; ++t) {
        const int v = severity_from_total(t).value;
        CHECK(v >= prev);
        CHECK(severity_from_total(t).binary == (v >= 2));
        prev = v;
    }
}

TEST_CASE("render_summary matches the published wording") {
    StructuredSummary s;
    s.assessments = {{PhqItem::SD, Degree::Occasional}, {PhqItem::LOE, Degree::Occasional}};
    CHECK(render_summary(s, SeverityLevel(0)) == kTrainSet326);

    StructuredSummary severe;
    severe.assessments = {{PhqItem::FD, Degree::Severe}};
    severe.causes = {{"their ongoing unemployment and financial stress",
                      CauseCategory::EconomicAndCareerStress}};
    severe.action_plan = ActionPlan::Referral;
    const std::string text = render_summary(severe, SeverityLevel(3));
    CHECK(ends_with(text, "psychiatrist or psychologist."));
    CHECK(text.find("It is advised") != std::string::npos);

    StructuredSummary mild = severe;
    mild.action_plan = ActionPlan::ConditionalReferral;
    CHECK(render_summary(mild, SeverityLevel(1)).find("If symptoms persist or worsen") !=
          std::string::npos);
}

TEST_CASE("render_summary validates the action plan against severity") {
    StructuredSummary s;
    s.assessments = {{PhqItem::SD, Degree::Mild}};
    s.action_plan = ActionPlan::Referral;
    CHECK_THROWS_AS(render_summary(s, SeverityLevel(1)), ValidationError);
    s.action_plan = ActionPlan::None;
    CHECK_THROWS_AS(render_summary(s, SeverityLevel(2)), ValidationError);
    s.action_plan = ActionPlan::ConditionalReferral;
    CHECK_THROWS_AS(render_summary(s, SeverityLevel(0)), ValidationError);
}

TEST_CASE("render_summary rejects out-of-order assessments") {
    StructuredSummary s;
    s.assessments = {{PhqItem::LOE, Degree::Mild}, {PhqItem::SD, Degree::Mild}};
    CHECK_THROWS_AS(render_summary(s, SeverityLevel(0)), ValidationError);
    s.assessments = {{PhqItem::SD, Degree::Mild}, {PhqItem::SD, Degree::Severe}};
    CHECK_THROWS_AS(render_summary(s, SeverityLevel(0)), ValidationError);
}

TEST_CASE("parse_summary recovers the TrainSet_326 record") {
    const StructuredSummary s = parse_summary(kTrainSet326);
    CHECK_FALSE(s.has_history);
    REQUIRE(s.assessments.size() == 2);
    CHECK(s.assessments[0] == Assessment{PhqItem::SD, Degree::Occasional});
    CHECK(s.assessments[1] == Assessment{PhqItem::LOE, Degree::Occasional});
    CHECK(s.causes.empty());
    CHECK(s.action_plan == ActionPlan::None);
}

TEST_CASE("parse_summary recovers the TrainSet_330 record") {
    const StructuredSummary s = parse_summary(kTrainSet330);
    CHECK_FALSE(s.has_history);
    REQUIRE(s.assessments.size() == 7);
    CHECK(s.assessments[0] == Assessment{PhqItem::LOI, Degree::Mild});
    CHECK(s.assessments[1] == Assessment{PhqItem::FD, Degree::Occasional});
    CHECK(s.assessments[2] == Assessment{PhqItem::SD, Degree::Mild});
    CHECK(s.assessments[3] == Assessment{PhqItem::LOE, Degree::Mild});
    CHECK(s.assessments[4] == Assessment{PhqItem::AC, Degree::Severe});
    CHECK(s.assessments[5] == Assessment{PhqItem::LSE, Degree::Severe});
    CHECK(s.assessments[6] == Assessment{PhqItem::PC, Degree::Significant});
    REQUIRE(s.causes.size() == 1);
    CHECK(s.causes[0].text == "the various challenges they will face after graduation");
    CHECK(s.causes[0].category == CauseCategory::LifeEventsAndEnvironmentalAdaptation);
    CHECK(s.action_plan == ActionPlan::ConditionalReferral);
}

TEST_CASE("parse_summary recovers the TestSet_311 record") {
    const StructuredSummary s = parse_summary(kTestSet311);
    CHECK_FALSE(s.has_history);
    REQUIRE(s.assessments.size() == 8);
    CHECK(s.assessments[0] == Assessment{PhqItem::LOI, Degree::Severe});
    CHECK(s.assessments[5] == Assessment{PhqItem::LSE, Degree::Occasional});
    CHECK(s.assessments[7] == Assessment{PhqItem::PC, Degree::Occasional});
    REQUIRE(s.causes.size() == 5);
    CHECK(s.causes[0].category == CauseCategory::EconomicAndCareerStress);
    CHECK(s.causes[3].category == CauseCategory::HealthIssues);
    CHECK(s.action_plan == ActionPlan::Referral);
}

TEST_CASE("parse_summary handles the history sentence with opaque suffix") {
    const StructuredSummary s = parse_summary(kDevSet367);
    CHECK(s.has_history);
    REQUIRE(s.assessments.size() == 8);
    CHECK(s.assessments[0] == Assessment{PhqItem::LOI, Degree::Severe});
    CHECK(s.assessments[2] == Assessment{PhqItem::SD, Degree::Significant});
    CHECK(s.assessments[7] == Assessment{PhqItem::PC, Degree::Occasional});
    REQUIRE(s.causes.size() == 6);
    CHECK(s.causes[1].text == "relocation and the need to re-establish their life");
    CHECK(s.causes[4].category == CauseCategory::Unspecified);
    CHECK(s.action_plan == ActionPlan::Referral);
}

TEST_CASE("parse_summary rejects out-of-grammar text") {
    CHECK_THROWS_AS(parse_summary("The participant enjoys hiking."), ParseError);
    CHECK_THROWS_AS(parse_summary(""), ParseError);
    CHECK_THROWS_AS(
        parse_summary("The participant primarily experiences delightful weather."), ParseError);
    try {
        parse_summary("The participant enjoys hiking.");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("sentence 0") != std::string::npos);
    }
}

TEST_CASE("render/parse round-trip identity on random records") {
    Rng rng(20240811);
    for (int i = 0; i < 1000; ++i) {
        const auto [record, severity] = testutil::random_summary(rng);
        const StructuredSummary back = parse_summary(record.rendered_text);
        if (!same_structure(record, back)) {
            INFO("text: " << record.rendered_text);
            REQUIRE(same_structure(record, back));
        }
    }
}

TEST_CASE("sentence 4 wording tracks severity") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const auto [record, severity] = testutil::random_summary(rng);
        const bool has_referral =
            record.rendered_text.find("It is advised") != std::string::npos;
        const bool has_conditional =
            record.rendered_text.find("If symptoms persist or worsen") != std::string::npos;
        CHECK(has_referral == (severity.value >= 2));
        CHECK(has_conditional == (severity.value == 1));
    }
}

TEST_CASE("item descriptions carry the scale wording") {
    CHECK(std::string(item_description(PhqItem::LOI)) ==
          "Little interest or pleasure in doing things.");
    CHECK(std::string(item_description(PhqItem::AC)) == "Poor appetite or overeating.");
    for (PhqItem it : kPhqItems) CHECK(!std::string(item_description(it)).empty());
    CHECK(kPhqItems.size() == 8);
}
