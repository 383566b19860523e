#include "covflow/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace covflow;

namespace {

std::string message_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultsOnEmptyInput) {
    const ExperimentConfig c = parse_config("# nothing\n\n");
    EXPECT_EQ(c, ExperimentConfig{});
}

TEST(Config, ParsesAllSections) {
    const ExperimentConfig c = parse_config(R"(
[grid]
dim = 3
n_points = 32
half_width = 6
[flow]
a = 0.5
b = -1
dt = 1e-3  # trailing comment
t_end = 0.25
[potential]
kind = block_matrix_3d
core_radius = 0.8
[scalar]
v1_kind = gaussian
v1_amplitude = 2
v2_kind = constant
v2_im = -0.3
[weights]
alpha = 1.5
beta = 0.5
[carleman]
enabled = true
mu = 0.25, 1
R = 4,8
v = 0, 0, 1
[output]
formats = json
)");
    EXPECT_EQ(c.grid, (GridSpec{3, 6.0, 32}));
    EXPECT_EQ(c.a, 0.5);
    EXPECT_EQ(c.b, -1.0);
    EXPECT_EQ(c.potential.kind, PotentialKind::block_matrix_3d);
    EXPECT_EQ(c.potential.core_radius, 0.8);
    EXPECT_EQ(c.V1.kind, ScalarSpec::Kind::gaussian);
    EXPECT_EQ(c.V2.amplitude, cplx(0.0, -0.3));
    EXPECT_TRUE(c.carleman_enabled);
    EXPECT_EQ(c.carleman_mu, (rvec{0.25, 1.0}));
    EXPECT_EQ(c.carleman_v, (Vec3{0, 0, 1}));
    EXPECT_EQ(c.output_formats, "json");
}

TEST(Config, RoundTripThroughSerialization) {
    ExperimentConfig c;
    c.grid = {3, 5.5, 24};
    c.potential.kind = PotentialKind::block_field_3d;
    c.dt = 1.0 / 3.0 * 1e-3;
    c.V2.kind = ScalarSpec::Kind::gaussian;
    c.V2.amplitude = {0.1, -0.7};
    c.carleman_R = {3.0, 7.25};
    c.carleman_v = {0, 1, 0};
    c.output_directory = "some/dir";
    const ExperimentConfig back = parse_config(serialize_config(c));
    EXPECT_EQ(back, c);
    EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, ErrorsCarryLineNumbers) {
    EXPECT_NE(message_of("[grid]\nfoo = 1\n").find("line 2"), std::string::npos);
    EXPECT_NE(message_of("[grid]\nfoo = 1\n").find("unknown key"), std::string::npos);
    EXPECT_NE(message_of("[nonsense]\n").find("unknown section"), std::string::npos);
    EXPECT_NE(message_of("[flow]\ndt = 1\ndt = 2\n").find("duplicate key"), std::string::npos);
    EXPECT_NE(message_of("dt = 1\n").find("outside of any section"), std::string::npos);
    EXPECT_NE(message_of("[flow]\ndt 1\n").find("expected key = value"), std::string::npos);
    EXPECT_NE(message_of("[flow]\ndt = abc\n").find("line 2"), std::string::npos);
}

TEST(Config, SemanticValidation) {
    EXPECT_FALSE(message_of("[flow]\nt_end = 2\n").empty());
    EXPECT_FALSE(message_of("[grid]\nn_points = 63\n").empty());
    EXPECT_FALSE(message_of("[potential]\nkind = block_field_3d\n").empty());  // needs dim = 3
    EXPECT_FALSE(message_of("[potential]\nkind = custom\n").empty());
    EXPECT_FALSE(message_of("[potential]\ngenerator = x2x3\n").empty());
    EXPECT_FALSE(message_of("[scalar]\nv1_kind = gaussian\nv1_width = -1\n").empty());
    EXPECT_FALSE(message_of("[carleman]\nv = 1, 1\n").empty());
    EXPECT_FALSE(message_of("[carleman]\nv = 0, 0, 1\n").empty());  // 2D grid
    EXPECT_FALSE(message_of("[output]\nformats = xml\n").empty());
    EXPECT_FALSE(message_of("[weights]\nalpha = 0\n").empty());
}

TEST(Config, HashIgnoresOutputSection) {
    ExperimentConfig a, b;
    b.output_directory = "elsewhere";
    b.output_formats = "csv";
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.dt = 1e-4;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, MissingFile) {
    try {
        load_config("/nonexistent/covflow.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cannot open config file"), std::string::npos);
    }
}

TEST(Config, ShippedConfigsLoad) {
    for (const char* name : {"free.cfg", "constant_field.cfg", "pure_gauge.cfg"}) {
        const auto path = std::filesystem::path(COVFLOW_CONFIG_DIR) / name;
        EXPECT_NO_THROW(load_config(path.string())) << name;
    }
}
