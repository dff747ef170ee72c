#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "pacecurve/ingest.hpp"
#include "pacecurve/synth.hpp"

using namespace pacecurve;

namespace {

std::string header_500() {
  return "athlete_id,race_date,distance_m,age_group,event_type,race_phase,"
         "t1,t2,t3,t4,t5,t6,t7,t8,t9,t10\n";
}

std::string row_500(const std::string& id, const std::string& date,
                    const std::string& splits,
                    const std::string& age = "OPEN",
                    const std::string& event = "DOM",
                    const std::string& phase = "NA") {
  return id + "," + date + ",500," + age + "," + event + "," + phase + "," +
         splits + "\n";
}

RaceRecord make_record(std::vector<double> times, int distance = 500) {
  RaceRecord rec;
  rec.athlete_id = "A001";
  rec.race_date = RaceDate{2018, 6, 1};
  rec.distance_m = distance;
  rec.segment_times_s = std::move(times);
  return rec;
}

}  // namespace

TEST_CASE("parse_race_csv accepts a valid 500 m row") {
  const std::string csv =
      header_500() +
      row_500("A001", "2018-06-01",
              "21.000,19.500,19.800,20.100,20.400,20.700,21.000,21.300,21.600,21.900");
  const ParseResult result = parse_race_csv(csv);
  REQUIRE(result.records.size() == 1);
  REQUIRE(result.rejects.empty());
  const RaceRecord& rec = result.records[0];
  CHECK(rec.athlete_id == "A001");
  CHECK(rec.distance_m == 500);
  CHECK(rec.segment_times_s.size() == 10);
  CHECK(rec.segment_times_s[0] == 21.000);
  CHECK(rec.segment_times_s[9] == 21.900);
  CHECK(rec.age_group == AgeGroup::Open);
  CHECK(rec.event_type == EventType::Domestic);
  CHECK(!rec.race_phase.has_value());
}

TEST_CASE("parse_race_csv rejects a 500 m row with 9 splits") {
  const std::string csv =
      header_500() +
      row_500("A001", "2018-06-01", "21,19.5,19.8,20.1,20.4,20.7,21,21.3,21.6");
  const ParseResult result = parse_race_csv(csv);
  CHECK(result.records.empty());
  REQUIRE(result.rejects.size() == 1);
  CHECK(result.rejects[0].line == 2);
  CHECK(result.rejects[0].reason.find("split") != std::string::npos);
}

TEST_CASE("parse_race_csv rejects a negative split") {
  const std::string csv =
      header_500() +
      row_500("A001", "2018-06-01",
              "21,-19.5,19.8,20.1,20.4,20.7,21,21.3,21.6,21.9");
  const ParseResult result = parse_race_csv(csv);
  CHECK(result.records.empty());
  REQUIRE(result.rejects.size() == 1);
  CHECK(result.rejects[0].reason.find("positive") != std::string::npos);
}

TEST_CASE("parse_race_csv rejects bad enum levels and dates by row") {
  const std::string good =
      "20.5,19.5,19.8,20.1,20.4,20.7,21.0,21.3,21.6,21.9";
  const std::string csv = header_500() +
                          row_500("A001", "2018-02-30", good) +
                          row_500("A002", "2018-06-01", good, "U30") +
                          row_500("A003", "2018-06-01", good, "U21", "XYZ") +
                          row_500("A004", "2018-06-01", good, "U21", "WCJ", "Q");
  const ParseResult result = parse_race_csv(csv);
  CHECK(result.records.empty());
  REQUIRE(result.rejects.size() == 4);
  CHECK(result.rejects[0].line == 2);
  CHECK(result.rejects[3].line == 5);
}

TEST_CASE("parse_race_csv file-level errors") {
  CHECK_THROWS_AS(parse_race_csv(""), EmptyFile);
  CHECK_THROWS_AS(parse_race_csv(header_500()), EmptyFile);
  CHECK_THROWS_AS(parse_race_csv("who,what\n1,2\n"), MalformedHeader);
  // split columns must be named t1..tN in order
  CHECK_THROWS_AS(
      parse_race_csv("athlete_id,race_date,distance_m,age_group,event_type,"
                     "race_phase,t1,t3\nA,2020-01-01,500,OPEN,DOM,NA,1,2\n"),
      MalformedHeader);
}

TEST_CASE("normalize_profile of equal splits is the unit profile") {
  const RaceRecord rec = make_record(std::vector<double>(10, 20.0));
  const VelocityProfile p = normalize_profile(rec);
  REQUIRE(p.v_norm.size() == 10);
  for (double v : p.v_norm) CHECK(v == Catch::Approx(1.0).margin(1e-14));
  CHECK(p.grid_m.front() == 25.0);
  CHECK(p.grid_m.back() == 475.0);
}

TEST_CASE("normalize_profile hand-worked two-segment race") {
  // Splits (10, 30) over 100 m: average velocity 100/40 = 2.5 m/s.
  // Segment velocities 5 and 5/3, normalized 2.0 and 2/3.
  const RaceRecord rec = make_record({10.0, 30.0}, 100);
  const VelocityProfile p = normalize_profile(rec);
  REQUIRE(p.v_norm.size() == 2);
  CHECK(p.v_norm[0] == Catch::Approx(2.0).margin(1e-12));
  CHECK(p.v_norm[1] == Catch::Approx(2.0 / 3.0).margin(1e-12));
  CHECK(p.grid_m[0] == 25.0);
  CHECK(p.grid_m[1] == 75.0);
}

TEST_CASE("harmonic-mean identity holds for random records") {
  std::mt19937_64 rng(991);
  std::uniform_real_distribution<double> unif(15.0, 35.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int distance = (trial % 2 == 0) ? 500 : 1000;
    std::vector<double> times(distance / 50);
    for (double& t : times) t = unif(rng);
    const VelocityProfile p = normalize_profile(make_record(times, distance));
    double inv_sum = 0.0;
    for (double v : p.v_norm) {
      CHECK(v > 0.0);
      inv_sum += 1.0 / v;
    }
    CHECK(std::abs((double)p.v_norm.size() / inv_sum - 1.0) < 1e-12);
  }
}

TEST_CASE("normalization is scale invariant") {
  std::vector<double> times{21.2, 19.7, 19.9, 20.3, 20.8, 21.1, 21.4, 21.8, 22.2, 22.5};
  const VelocityProfile base = normalize_profile(make_record(times));
  for (double c : {0.5, 1.7, 3.0}) {
    std::vector<double> scaled = times;
    for (double& t : scaled) t *= c;
    const VelocityProfile p = normalize_profile(make_record(scaled));
    for (size_t i = 0; i < p.v_norm.size(); ++i)
      CHECK(p.v_norm[i] == Catch::Approx(base.v_norm[i]).margin(1e-12));
  }
}

TEST_CASE("build_career_sequences groups and orders") {
  std::vector<RaceRecord> records;
  const std::vector<double> times(10, 20.0);
  for (int a = 0; a < 3; ++a)
    for (int r = 0; r < 5; ++r) {
      RaceRecord rec = make_record(times);
      rec.athlete_id = "A" + std::to_string(a);
      rec.race_date = RaceDate{2019, 8, 25 - 5 * r};  // deliberately unordered
      records.push_back(rec);
    }
  const CareerBuildResult result = build_career_sequences(records);
  REQUIRE(result.sequences.size() == 3);
  for (const auto& seq : result.sequences) {
    REQUIRE(seq.races.size() == 5);
    for (size_t i = 1; i < seq.races.size(); ++i)
      CHECK(seq.races[i - 1].race_date <= seq.races[i].race_date);
  }
}

TEST_CASE("mixed-distance athletes split into one sequence per distance") {
  std::vector<RaceRecord> records;
  records.push_back(make_record(std::vector<double>(10, 20.0), 500));
  records.push_back(make_record(std::vector<double>(20, 21.0), 1000));
  const CareerBuildResult result = build_career_sequences(records);
  REQUIRE(result.sequences.size() == 2);
  CHECK(result.sequences[0].distance_m == 500);
  CHECK(result.sequences[1].distance_m == 1000);
}

TEST_CASE("same-date heats and finals are ordered by phase and kept") {
  const std::vector<double> times(10, 20.0);
  RaceRecord heat = make_record(times);
  heat.race_phase = RacePhase::Heat;
  RaceRecord final_race = make_record(times);
  final_race.race_phase = RacePhase::Final;
  RaceRecord semi = make_record(times);
  semi.race_phase = RacePhase::SemiFinal;

  const CareerBuildResult result =
      build_career_sequences({final_race, heat, semi});
  REQUIRE(result.sequences.size() == 1);
  const auto& races = result.sequences[0].races;
  REQUIRE(races.size() == 3);
  CHECK(races[0].race_phase == RacePhase::Heat);
  CHECK(races[1].race_phase == RacePhase::SemiFinal);
  CHECK(races[2].race_phase == RacePhase::Final);
  CHECK(result.duplicates.empty());

  // A true duplicate (same date and phase) warns but is kept.
  const CareerBuildResult dup = build_career_sequences({heat, heat});
  REQUIRE(dup.sequences.size() == 1);
  CHECK(dup.sequences[0].races.size() == 2);
  REQUIRE(dup.duplicates.size() == 1);
  CHECK(dup.duplicates[0].athlete_id == "A001");
}

TEST_CASE("mean_profile basics") {
  CHECK_THROWS_AS(mean_profile({}), EmptyInput);

  VelocityProfile a{100, {25, 75}, {1.1, 0.9}};
  VelocityProfile b{100, {25, 75}, {0.9, 1.1}};
  const VelocityProfile mean = mean_profile({a, b});
  CHECK(mean.v_norm[0] == Catch::Approx(1.0).margin(1e-15));
  CHECK(mean.v_norm[1] == Catch::Approx(1.0).margin(1e-15));

  VelocityProfile c{100, {20, 75}, {1.0, 1.0}};
  CHECK_THROWS_AS(mean_profile({a, c}), GridMismatch);

  const VelocityProfile same = mean_profile({a, a});
  CHECK(same.v_norm[0] == a.v_norm[0]);
}

TEST_CASE("mean of a generated 500 m corpus peaks early then declines") {
  GeneratorSpec spec = default_spec_500();
  spec.n_athletes = 40;
  spec.races_per_athlete = 5;
  spec.seed = 515;
  spec.noise_sd = 0.0;
  // Small spread keeps the sample mean close to the generating mean curve.
  spec.score_variances = Eigen::Vector4d(0.01, 0.005, 0.002, 0.001);
  const Generator gen(spec);
  const SynthDataset dataset = gen.generate_dataset();
  std::vector<VelocityProfile> profiles;
  for (const auto& rec : dataset.records)
    profiles.push_back(normalize_profile(rec));
  const VelocityProfile mean = mean_profile(profiles);
  size_t peak = 0;
  for (size_t i = 1; i < mean.v_norm.size(); ++i)
    if (mean.v_norm[i] > mean.v_norm[peak]) peak = i;
  CHECK(mean.grid_m[peak] >= 75.0);
  CHECK(mean.grid_m[peak] <= 125.0);
  CHECK(mean.v_norm.back() < mean.v_norm[peak]);
}

TEST_CASE("parse -> serialize -> parse is the identity on valid records") {
  GeneratorSpec spec = default_spec_500();
  spec.n_athletes = 4;
  spec.races_per_athlete = 3;
  spec.seed = 77;
  spec.noise_sd = 0.004;
  const SynthDataset dataset = Generator(spec).generate_dataset();

  const std::string once = serialize_race_csv(dataset.records);
  const ParseResult parsed = parse_race_csv(once);
  REQUIRE(parsed.rejects.empty());
  REQUIRE(parsed.records.size() == dataset.records.size());
  const std::string twice = serialize_race_csv(parsed.records);
  CHECK(once == twice);
  for (size_t i = 0; i < parsed.records.size(); ++i) {
    CHECK(parsed.records[i].athlete_id == dataset.records[i].athlete_id);
    CHECK(parsed.records[i].segment_times_s == dataset.records[i].segment_times_s);
    CHECK(parsed.records[i].race_date == dataset.records[i].race_date);
  }
}

TEST_CASE("mixed-distance serialization pads 500 m rows") {
  std::vector<RaceRecord> records;
  records.push_back(make_record(std::vector<double>(10, 20.0), 500));
  records.push_back(make_record(std::vector<double>(20, 21.0), 1000));
  const std::string csv = serialize_race_csv(records);
  const ParseResult parsed = parse_race_csv(csv);
  REQUIRE(parsed.rejects.empty());
  REQUIRE(parsed.records.size() == 2);
  CHECK(parsed.records[0].segment_times_s.size() == 10);
  CHECK(parsed.records[1].segment_times_s.size() == 20);
}
