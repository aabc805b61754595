#include <doctest.h>

#include "causal/dataset.hpp"
#include "causal/design.hpp"
#include "causal/errors.hpp"
#include "causal/matching.hpp"
#include "causal/simulate.hpp"
#include "oracles.hpp"

using namespace causal;

namespace {

// Display-4 shaped file: baseline covariate, two treated, two control.
const char* kFourRows =
    "unit_id,scripts_t1,z,scripts_t2\n"
    "d1,10,1,15\n"
    "d2,1,1,5\n"
    "d3,9,0,14\n"
    "d4,2,0,2\n";

CovariateSchema scripts_schema() {
    CovariateSchema s;
    s.columns.push_back({"scripts_t1", ColumnKind::numeric, {}});
    return s;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("loads a four-row file with escrow sealed") {
    LoadResult r = load_dataset_text(kFourRows, scripts_schema(), "scripts_t2", "z", {});
    CHECK(r.dataset.n_units() == 4);
    CHECK(r.dataset.n_treated() == 2);
    CHECK(r.dataset.escrow_sealed());
    CHECK(r.rejections.empty());
    CHECK(r.dataset.unit_id(0) == "d1");
    CHECK(r.dataset.covariates(0)[0] == 10.0);
}

TEST_CASE("non-binary treatment value names the row") {
    std::string csv = "unit_id,x,z,y\n";
    for (int i = 1; i <= 6; ++i) {
        csv += "u" + std::to_string(i) + ",1," + (i % 2 ? "1" : "0") + ",2\n";
    }
    csv += "u7,1,2,2\n";
    try {
        load_dataset_text(csv, oracles::simple_schema(), "y", "z", {});
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
}

TEST_CASE("missing values reject rows with a report, complete-case rule") {
    std::string csv =
        "unit_id,x,z,y\n"
        "u1,1,1,2\n"
        "u2,,1,2\n"   // missing covariate
        "u3,3,0,\n"   // missing outcome
        "u4,4,,2\n"   // missing treatment
        "u5,abc,0,2\n"  // malformed covariate
        "u6,5,0,3\n";
    LoadResult r = load_dataset_text(csv, oracles::simple_schema(), "y", "z", {});
    CHECK(r.dataset.n_units() == 2);
    REQUIRE(r.rejections.size() == 4);
    CHECK(r.rejections[0].row_index == 2);
    CHECK(r.rejections[1].row_index == 3);
    CHECK(r.rejections[2].row_index == 4);
    CHECK(r.rejections[3].row_index == 5);
    std::string report = rejections_to_csv(r.rejections);
    CHECK(report.find("row_index,reason") == 0);
    CHECK(report.find("covariate column 'x'") != std::string::npos);
}

TEST_CASE("missing declared column is a schema error") {
    CHECK_THROWS_AS(load_dataset_text("unit_id,z,y\nu1,1,2\nu2,0,3\n",
                                      oracles::simple_schema(), "y", "z", {}),
                    SchemaError);
}

TEST_CASE("single-arm data cannot support causal comparison") {
    CHECK_THROWS_AS(load_dataset_text("unit_id,x,z,y\nu1,1,1,2\nu2,2,1,3\n",
                                      oracles::simple_schema(), "y", "z", {}),
                    ValidationError);
}

TEST_CASE("duplicate unit ids are rejected") {
    CHECK_THROWS_AS(load_dataset_text("unit_id,x,z,y\nu1,1,1,2\nu1,2,0,3\n",
                                      oracles::simple_schema(), "y", "z", {}),
                    ValidationError);
}

TEST_CASE("categorical columns encode as L-1 sorted indicators and decode back") {
    CovariateSchema schema;
    schema.columns.push_back({"specialty", ColumnKind::categorical, {}});
    std::string csv =
        "unit_id,specialty,z,y\n"
        "u1,Cardio,1,1\n"
        "u2,Gp,0,1\n"
        "u3,Endo,1,1\n"
        "u4,Cardio,0,1\n";
    LoadResult r = load_dataset_text(csv, schema, "y", "z", {});
    // Levels sorted: Cardio (reference), Endo, Gp -> width 2.
    CHECK(r.dataset.encoded_width() == 2);
    CHECK(r.resolved_schema.columns[0].levels ==
          std::vector<std::string>{"Cardio", "Endo", "Gp"});
    CHECK(r.dataset.decode_level(0, "specialty") == "Cardio");
    CHECK(r.dataset.decode_level(1, "specialty") == "Gp");
    CHECK(r.dataset.decode_level(2, "specialty") == "Endo");
    CHECK(r.dataset.covariates(2)[0] == 1.0);  // Endo indicator
    CHECK(r.dataset.covariates(2)[1] == 0.0);
}

TEST_CASE("loading the same bytes twice is byte-identical in digest and encoding") {
    LoadResult a = load_dataset_text(kFourRows, scripts_schema(), "scripts_t2", "z", {});
    LoadResult b = load_dataset_text(kFourRows, scripts_schema(), "scripts_t2", "z", {});
    CHECK(a.dataset.digest() == b.dataset.digest());
    for (std::size_t i = 0; i < a.dataset.n_units(); ++i) {
        auto xa = a.dataset.covariates(i);
        auto xb = b.dataset.covariates(i);
        CHECK(std::equal(xa.begin(), xa.end(), xb.begin()));
    }
}

TEST_CASE("escrow: no outcome access before release, release requires frozen matching design") {
    LoadResult r = oracles::simple_dataset({1, 2, 3, 4, 5, 6}, {0, 0, 0, 1, 1, 1},
                                           {1, 2, 3, 4, 5, 6});
    const Dataset& sealed = r.dataset;

    // Probe every accessor that could reveal outcome values.
    CHECK_THROWS_AS(sealed.outcome(0), EscrowViolation);
    CHECK_THROWS_AS(naive_before_after(sealed, "x"), EscrowViolation);
    CHECK_THROWS_AS(naive_regression(sealed), EscrowViolation);
    // The outcome column is not part of the covariate schema at all.
    CHECK_THROWS_AS(summarize_covariate(sealed, "y", Group::all), SchemaError);

    DesignReport design = oracles::frozen_design_for(sealed);

    SUBCASE("release with frozen design exposes outcomes and records an audit entry") {
        Dataset released = release_escrow(sealed, design);
        CHECK_FALSE(released.escrow_sealed());
        CHECK(released.outcome(0) == 1.0);
        REQUIRE(released.audit().size() == 1);
        CHECK(released.audit()[0].design_digest == design.digest());
        // The original object stays sealed.
        CHECK(sealed.escrow_sealed());
    }

    SUBCASE("unfrozen design is an escrow violation") {
        DesignReport thawed = design;
        thawed.frozen = false;
        CHECK_THROWS_AS(release_escrow(sealed, thawed), EscrowViolation);
    }

    SUBCASE("design built on a different file is a provenance error") {
        LoadResult other = oracles::simple_dataset({1, 2, 3, 4, 5, 7}, {0, 0, 0, 1, 1, 1},
                                                   {1, 2, 3, 4, 5, 6});
        DesignReport foreign = oracles::frozen_design_for(other.dataset);
        CHECK_THROWS_AS(release_escrow(sealed, foreign), ProvenanceError);
    }
}

TEST_CASE("summarize_covariate: constant column gives one bin with sd 0") {
    LoadResult r = oracles::simple_dataset({7, 7, 7, 7}, {0, 1, 0, 1}, {1, 2, 3, 4});
    Histogram h = summarize_covariate(r.dataset, "x", Group::all);
    REQUIRE(h.counts.size() == 1);
    CHECK(h.counts[0] == 4);
    CHECK(h.sd == 0.0);
    CHECK(h.mean == 7.0);
}

TEST_CASE("summarize_covariate: two-group split of 10 hand-built rows matches hand tally") {
    // treated x: {1,2,3,4,5}; control x: {6,7,8,9,10}
    LoadResult r = oracles::simple_dataset({1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                                           {1, 1, 1, 1, 1, 0, 0, 0, 0, 0},
                                           {0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    Histogram t = summarize_covariate(r.dataset, "x", Group::treated, 2);
    Histogram c = summarize_covariate(r.dataset, "x", Group::control, 2);
    CHECK(t.n == 5);
    CHECK(c.n == 5);
    // treated range [1,5], 2 equal bins: {1,2} and {3,4,5}
    CHECK(t.counts == std::vector<std::int64_t>{2, 3});
    CHECK(t.mean == doctest::Approx(3.0));
    CHECK(c.mean == doctest::Approx(8.0));
    CHECK_THROWS_AS(summarize_covariate(r.dataset, "nope", Group::all), SchemaError);
}

TEST_CASE("summarize works while sealed (covariates are not escrowed)") {
    LoadResult r = load_dataset_text(kFourRows, scripts_schema(), "scripts_t2", "z", {});
    CHECK_NOTHROW(summarize_covariate(r.dataset, "scripts_t1", Group::treated));
}

TEST_CASE("ids synthesized when no unit_id column") {
    std::string csv = "x,z,y\n1,1,2\n2,0,3\n";
    LoadResult r = load_dataset_text(csv, oracles::simple_schema(), "y", "z", {});
    CHECK(r.dataset.unit_id(0) == "u0000001");
    CHECK(r.dataset.unit_id(1) == "u0000002");
}

}  // TEST_SUITE
