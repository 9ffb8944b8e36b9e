#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <roughbsde/errors.hpp>
#include <roughbsde/io.hpp>
#include <roughbsde/presets.hpp>

#include "experiment.hpp"

using namespace rbsde;

TEST(Io, PathRoundTrip) {
    const auto p = brownian_path(4, uniform_grid(1.0, 16), 2);
    const auto q = path_from_json(Json::parse(to_json(p).dump()));
    ASSERT_EQ(q.knots(), p.knots());
    for (std::size_t k = 0; k < p.flat_values().size(); ++k) EXPECT_EQ(q.flat_values()[k], p.flat_values()[k]);
    for (std::size_t k = 0; k < p.knots(); ++k) EXPECT_EQ(q.times()[k], p.times()[k]);
}

TEST(Io, RoughPathRoundTrip) {
    const auto rp = brownian_lift_sample(8, uniform_grid(1.0, 12), 2);
    const auto back = rough_path_from_json(Json::parse(to_json(rp).dump()));
    ASSERT_EQ(back.intervals(), rp.intervals());
    EXPECT_EQ(back.p(), rp.p());
    for (std::size_t k = 0; k < rp.intervals(); ++k) {
        EXPECT_EQ(back.increment(k)[1], rp.increment(k)[1]);
        EXPECT_EQ(back.area(k)[1], rp.area(k)[1]);
    }
}

TEST(Io, NonFiniteBecomesNull) {
    EXPECT_TRUE(number(std::nan("")).is_null());
    EXPECT_TRUE(number(HUGE_VAL).is_null());
    EXPECT_EQ(number(1.5).get<double>(), 1.5);
}

TEST(Io, PathCsvHasHeaderAndRows) {
    const auto csv = to_csv(PiecewiseLinearPath({0.0, 1.0}, {{0.0, 1.0}, {2.0, 3.0}}));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,zeta1,zeta2");
    std::size_t rows = 0;
    while (std::getline(in, line)) rows += !line.empty();
    EXPECT_EQ(rows, 2u);
}

TEST(Io, AtomicWriteReplacesContent) {
    const auto dir = std::filesystem::temp_directory_path() / "roughbsde_io_test";
    std::filesystem::create_directories(dir);
    const auto file = dir / "out.txt";
    write_file_atomic(file, "first");
    write_file_atomic(file, "second");
    std::ifstream in(file);
    std::string s;
    in >> s;
    EXPECT_EQ(s, "second");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
    EXPECT_EQ(entries, 1u);
    std::filesystem::remove_all(dir);
}

TEST(Presets, UnknownNameIsAConfigError) {
    try {
        make_preset("nope");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "preset");
    }
}

TEST(Presets, DeclaredConstantsHold) {
    for (const auto& name : preset_names()) {
        const auto p = make_preset(name);
        EXPECT_NO_THROW(p.spec.validate(-3.0, 3.0, p.validation_u_max)) << name;
        EXPECT_EQ(p.spec.horizon, 1.0);
        EXPECT_EQ(p.spec.x0, 0.0);
    }
}

TEST(Presets, ValidateCatchesViolatedConstant) {
    auto spec = make_preset("discount").spec;
    spec.constants.c2f = -2.0;
    spec.constants.c1f = 0.1;
    EXPECT_THROW(spec.validate(-1.0, 1.0), DomainError);
}

TEST(ExperimentConfig, DefaultsRoundTrip) {
    const cli::ExperimentConfig a;
    const auto b = cli::ExperimentConfig::from_json(a.to_json());
    EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(ExperimentConfig, OverridesAreApplied) {
    const auto cfg = cli::ExperimentConfig::from_json(Json::parse(R"({
        "problem": {"preset": "xyH", "T": 0.5, "x0": 0.25},
        "driver": {"kind": "brownian", "seed": 9, "intervals": 32},
        "grid": {"nx": 41, "nt": 20, "window": 0.125},
        "mc": {"n_paths": 500, "nt": 20}
    })"));
    EXPECT_EQ(cfg.problem.preset, "xyH");
    EXPECT_EQ(*cfg.problem.horizon, 0.5);
    EXPECT_EQ(cfg.driver.intervals, 32u);
    EXPECT_EQ(cfg.grid.window, 0.125);
    EXPECT_EQ(cfg.mc.n_paths, 500u);
    const auto spec = cli::build_problem(cfg.problem);
    EXPECT_EQ(spec.horizon, 0.5);
    EXPECT_EQ(spec.x0, 0.25);
}

TEST(ExperimentConfig, ErrorsNameTheField) {
    const auto field_of = [](const char* text) -> std::string {
        try {
            cli::ExperimentConfig::from_json(Json::parse(text));
        } catch (const ConfigError& e) {
            return e.field();
        }
        return "<none>";
    };
    EXPECT_EQ(field_of(R"({"problem": {"T": -1}})"), "problem.T");
    EXPECT_EQ(field_of(R"({"problem": {"preset": "nope"}})"), "problem.preset");
    EXPECT_EQ(field_of(R"({"grid": {"nxx": 3}})"), "grid.nxx");
    EXPECT_EQ(field_of(R"({"driver": {"kind": "levy"}})"), "driver.kind");
    EXPECT_EQ(field_of(R"({"driver": {"p": 3.5}})"), "driver.p");
    EXPECT_EQ(field_of(R"({"mc": {"n_paths": 1}})"), "mc.n_paths");
    EXPECT_EQ(field_of(R"({"bogus": 1})"), "bogus");
    EXPECT_EQ(field_of(R"({})"), "<none>");
}
