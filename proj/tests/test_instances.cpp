#include "routeworks/instances.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "routeworks/rng.hpp"

using namespace routeworks;

namespace {

const char* kSolomonFixture = R"(R101

VEHICLE
NUMBER     CAPACITY
  25         200

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME

    0      35         35          0          0        230          0
    1      41         49         10        161        171         10
    2      35         17          7         50         60         10
    3      55         45         13        116        126         10
    4      55         20         19        149        159         10
    5      15         30         26         34         44         10
)";

const char* kLiLimFixture =
    "53\t200\t1\n"
    "0\t40\t50\t0\t0\t1236\t0\t0\t0\n"
    "1\t45\t68\t17\t100\t967\t90\t0\t3\n"
    "2\t45\t70\t8\t0\t1236\t90\t0\t4\n"
    "3\t42\t66\t-17\t200\t1100\t90\t1\t0\n"
    "4\t42\t68\t-8\t0\t1236\t90\t2\t0\n";

}  // namespace

TEST_CASE("travel_matrix computes Euclidean distances") {
    Instance inst;
    inst.capacity = 10;
    inst.nodes = {{0, 0, 0, 0, 0, 100, 0}, {1, 3, 4, 1, 0, 100, 0}, {2, 0, 0, 0, 0, 100, 0}};
    const auto d = travel_matrix(inst);
    CHECK(d(0, 1) == doctest::Approx(5.0));  // 3-4-5 triangle
    CHECK(d(1, 0) == d(0, 1));
    for (int i = 0; i < 3; ++i) CHECK(d(i, i) == 0.0);
}

TEST_CASE("travel_matrix matches an independent scalar loop") {
    const Instance inst = generate_cvrptw(11, 6);
    const auto d = travel_matrix(inst);
    for (std::size_t i = 0; i < inst.nodes.size(); ++i) {
        for (std::size_t j = 0; j < inst.nodes.size(); ++j) {
            const double dx = inst.nodes[i].x - inst.nodes[j].x;
            const double dy = inst.nodes[i].y - inst.nodes[j].y;
            CHECK(d(static_cast<int>(i), static_cast<int>(j)) ==
                  doctest::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-12));
        }
    }
}

TEST_CASE("solomon rounding truncates to one decimal") {
    Instance inst;
    inst.capacity = 10;
    inst.nodes = {{0, 0, 0, 0, 0, 100, 0}, {1, 1, 1, 1, 0, 100, 0}, {2, 0, 0, 0, 0, 100, 0}};
    const auto d = travel_matrix(inst, Rounding::SolomonTrunc);
    CHECK(d(0, 1) == doctest::Approx(1.4));  // sqrt(2) truncated
}

TEST_CASE("parse_solomon reads the R101 header region") {
    const Instance inst = parse_solomon_text(kSolomonFixture);
    CHECK(inst.id == "R101");
    CHECK(inst.capacity == 200.0);
    CHECK(inst.header_vehicles == 25);
    CHECK(inst.customers() == 5);
    CHECK(inst.nodes[1].x == 41.0);
    CHECK(inst.nodes[1].tw_open == 161.0);
    // depot duplicated as node N+1
    CHECK(inst.nodes[6].x == inst.nodes[0].x);
    CHECK(inst.nodes[6].tw_close == 230.0);
}

TEST_CASE("parse_solomon truncates to the first K customers") {
    const Instance inst = parse_solomon_text(kSolomonFixture, 3);
    CHECK(inst.customers() == 3);
    CHECK(inst.nodes[3].y == 45.0);
}

TEST_CASE("parse_solomon with count 0 keeps only the depot") {
    const Instance inst = parse_solomon_text(kSolomonFixture, 0);
    CHECK(inst.customers() == 0);
    CHECK(inst.nodes.size() == 2);
    CHECK(validate_instance(inst).empty());
}

TEST_CASE("parse_solomon rejects malformed input with line numbers") {
    CHECK_THROWS_AS(parse_solomon_text("R1\n\nCUSTOMER\nheader\n0 0 0 0 0 1 0\n"), ParseError);
    const std::string dup = std::string(kSolomonFixture) + "    3   1 1 1 1 2 1\n";
    CHECK_THROWS_WITH_AS(parse_solomon_text(dup), doctest::Contains("duplicate"), ParseError);
    const std::string bad = std::string(kSolomonFixture) + "    9   1 1\n";
    CHECK_THROWS_AS(parse_solomon_text(bad), ParseError);
}

TEST_CASE("solomon round-trip is a parser fixed point") {
    const Instance a = parse_solomon_text(kSolomonFixture);
    const Instance b = parse_solomon_text(serialize_solomon(a));
    REQUIRE(a.nodes.size() == b.nodes.size());
    CHECK(a.capacity == b.capacity);
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        CHECK(a.nodes[i].x == b.nodes[i].x);
        CHECK(a.nodes[i].y == b.nodes[i].y);
        CHECK(a.nodes[i].demand == b.nodes[i].demand);
        CHECK(a.nodes[i].tw_open == b.nodes[i].tw_open);
        CHECK(a.nodes[i].tw_close == b.nodes[i].tw_close);
        CHECK(a.nodes[i].service == b.nodes[i].service);
    }
    // serialize is deterministic, so a second pass is byte-identical
    CHECK(serialize_solomon(a) == serialize_solomon(b));
}

TEST_CASE("parse_li_lim recovers and re-normalizes pairs") {
    const PdpInstance inst = parse_li_lim_text(kLiLimFixture);
    CHECK(inst.capacity == 200.0);
    CHECK(inst.header_vehicles == 53);
    CHECK(inst.requests() == 2);
    CHECK(inst.delivery_of(1) == 3);
    CHECK(inst.nodes[1].demand == 17.0);
    CHECK(inst.nodes[3].demand == -17.0);
    CHECK(validate_instance(inst).empty());
}

TEST_CASE("parse_li_lim single request") {
    const std::string one =
        "5\t100\t1\n"
        "0\t0\t0\t0\t0\t100\t0\t0\t0\n"
        "1\t1\t1\t3\t0\t100\t0\t0\t2\n"
        "2\t2\t2\t-3\t0\t100\t0\t1\t0\n";
    const PdpInstance inst = parse_li_lim_text(one);
    CHECK(inst.requests() == 1);
    CHECK(inst.delivery_of(1) == 2);
}

TEST_CASE("parse_li_lim truncation keeps the first K requests") {
    const PdpInstance inst = parse_li_lim_text(kLiLimFixture, 1);
    CHECK(inst.requests() == 1);
    CHECK(inst.nodes[1].demand == 17.0);
}

TEST_CASE("parse_li_lim pairing errors") {
    const std::string unpaired =
        "5\t100\t1\n"
        "0\t0\t0\t0\t0\t100\t0\t0\t0\n"
        "1\t1\t1\t3\t0\t100\t0\t0\t0\n";
    CHECK_THROWS_WITH_AS(parse_li_lim_text(unpaired), doctest::Contains("unpaired"), ParseError);

    const std::string mismatched =
        "5\t100\t1\n"
        "0\t0\t0\t0\t0\t100\t0\t0\t0\n"
        "1\t1\t1\t3\t0\t100\t0\t0\t2\n"
        "2\t2\t2\t-4\t0\t100\t0\t1\t0\n";
    CHECK_THROWS_WITH_AS(parse_li_lim_text(mismatched), doctest::Contains("mismatched"),
                         ParseError);

    const std::string cycle =
        "5\t100\t1\n"
        "0\t0\t0\t0\t0\t100\t0\t0\t0\n"
        "1\t1\t1\t3\t0\t100\t0\t0\t2\n"
        "2\t2\t2\t-3\t0\t100\t0\t3\t0\n"
        "3\t3\t3\t3\t0\t100\t0\t0\t1\n";
    CHECK_THROWS_WITH_AS(parse_li_lim_text(cycle), doctest::Contains("cycle"), ParseError);
}

TEST_CASE("li_lim round-trip is a parser fixed point") {
    const PdpInstance a = parse_li_lim_text(kLiLimFixture);
    const PdpInstance b = parse_li_lim_text(serialize_li_lim(a));
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        CHECK(a.nodes[i].x == b.nodes[i].x);
        CHECK(a.nodes[i].demand == b.nodes[i].demand);
        CHECK(a.nodes[i].tw_close == b.nodes[i].tw_close);
    }
    CHECK(serialize_li_lim(a) == serialize_li_lim(b));
}

TEST_CASE("generate_cvrptw is deterministic in the seed") {
    const Instance a = generate_cvrptw(7, 12);
    const Instance b = generate_cvrptw(7, 12);
    CHECK(serialize_solomon(a) == serialize_solomon(b));
    const Instance c = generate_cvrptw(8, 12);
    CHECK(serialize_solomon(a) != serialize_solomon(c));
}

TEST_CASE("generated instances pass validation") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const Instance inst = generate_cvrptw(seed, 1 + static_cast<int>(seed % 20));
        CAPTURE(seed);
        CHECK(validate_instance(inst).empty());
    }
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const PdpInstance inst = generate_pdptw(seed, 1 + static_cast<int>(seed % 15));
        CAPTURE(seed);
        CHECK(validate_instance(inst).empty());
    }
}

TEST_CASE("generate_cvrptw n=1 customer is reachable inside its window") {
    const Instance inst = generate_cvrptw(3, 1);
    const auto d = travel_matrix(inst);
    const NodeRec& c = inst.nodes[1];
    const double start = std::max(inst.nodes[0].tw_open + d(0, 1), c.tw_open);
    CHECK(start <= c.tw_close);
    CHECK(start + c.service + d(1, 2) <= inst.horizon_close());
}

TEST_CASE("generate_pdptw single request admits a feasible route") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const PdpInstance inst = generate_pdptw(seed, 1);
        const auto d = travel_matrix(inst);
        double t = std::max(d(0, 1), inst.nodes[1].tw_open);
        REQUIRE(t <= inst.nodes[1].tw_close);
        t = std::max(t + inst.nodes[1].service + d(1, 2), inst.nodes[2].tw_open);
        REQUIRE(t <= inst.nodes[2].tw_close);
        CHECK(t + inst.nodes[2].service + d(2, 3) <= inst.horizon_close());
    }
}

TEST_CASE("generation errors on impossible profiles") {
    GenProfile impossible;
    impossible.horizon = 0.01;  // cannot reach anything and return
    CHECK_THROWS_AS(generate_cvrptw(1, 5, impossible), GenerationError);
    CHECK_THROWS_AS(generate_pdptw(1, 5, impossible), GenerationError);
}

TEST_CASE("validate_instance flags a depot due date below the reach bound") {
    Instance inst = generate_cvrptw(5, 6);
    inst.nodes.front().tw_close = 0.5;  // far below the single-visit bound
    inst.nodes.back().tw_close = 0.5;
    const auto violations = validate_instance(inst);
    REQUIRE(!violations.empty());
    bool found = false;
    for (const auto& v : violations) {
        if (v.what.find("due date") != std::string::npos) found = true;
    }
    CHECK(found);
}

TEST_CASE("validate_instance flags broken pdp pairing invariants") {
    PdpInstance inst = generate_pdptw(5, 4);
    inst.nodes[1 + inst.requests()].demand = -inst.nodes[1].demand + 1.0;
    const auto violations = validate_instance(inst);
    REQUIRE(!violations.empty());
    CHECK(violations.front().what.find("negate") != std::string::npos);
}
