// Exercises the shared library through its C surface only: opaque handles,
// status codes, thread-local error text, and byte-stable report strings.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "resdual.h"

extern "C" int capi_smoke_run(void);

namespace {

bool contains(const char* hay, const char* needle) {
    return hay != nullptr && std::string(hay).find(needle) != std::string::npos;
}

rd_model_config small_config() {
    rd_model_config c{};
    c.L = 2;
    c.T = 3;
    c.d = 4;
    c.mlp_hidden = 0;  // defaulted to 4*d inside
    c.mixer = RD_MIXER_SEQ_SHORTSWA;
    c.window = 2;
    c.depth_params_shared = 1;
    c.seed = 7;
    return c;
}

rd_duality_opts random_opts() {
    rd_duality_opts o{};
    o.L = 4;
    o.T = 6;
    o.d = 8;
    o.seed = 11;
    o.mixer = RD_MIXER_STANDARD;
    o.mixer_window = RD_WINDOW_FULL;
    o.stack = RD_STACK_RANDOM;
    o.K = 2;
    o.mode = RD_CHECK_BIT_EXACT;
    o.dtype = RD_DTYPE_F64;
    o.tolerance = -1.0;
    o.include_timing = 0;
    return o;
}

std::vector<double> ramp(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 0.01 * double(i) - 0.3;
    return v;
}

}  // namespace

TEST_CASE("capi: version string") { CHECK(std::string(rd_version()) == "0.1.0"); }

TEST_CASE("capi: pure-C smoke translation unit passes") { CHECK(capi_smoke_run() == 0); }

TEST_CASE("capi: model create / forward / config echo") {
    const rd_model_config cfg = small_config();
    rd_model* m = nullptr;
    REQUIRE(rd_model_create(&cfg, &m) == RD_OK);
    REQUIRE(m != nullptr);

    rd_model_config echo{};
    REQUIRE(rd_model_config_get(m, &echo) == RD_OK);
    CHECK(echo.L == 2);
    CHECK(echo.mixer == RD_MIXER_SEQ_SHORTSWA);
    CHECK(echo.window == 2);
    CHECK(echo.mlp_hidden == cfg.mlp_hidden);
    CHECK(echo.seed == 7);

    const std::vector<double> input = ramp(3 * 4);
    std::vector<double> out((2 + 1) * 3 * 4, -1.0);
    REQUIRE(rd_model_forward(m, input.data(), out.data()) == RD_OK);
    CHECK(std::memcmp(out.data(), input.data(), input.size() * sizeof(double)) == 0);

    // same config, fresh handle: byte-identical stack
    rd_model* m2 = nullptr;
    REQUIRE(rd_model_create(&cfg, &m2) == RD_OK);
    std::vector<double> out2(out.size(), 0.0);
    REQUIRE(rd_model_forward(m2, input.data(), out2.data()) == RD_OK);
    CHECK(std::memcmp(out.data(), out2.data(), out.size() * sizeof(double)) == 0);

    rd_model_release(m2);
    rd_model_release(m);
}

TEST_CASE("capi: save and load round-trip through files") {
    const rd_model_config cfg = small_config();
    rd_model* m = nullptr;
    REQUIRE(rd_model_create(&cfg, &m) == RD_OK);
    const std::string path =
        (std::filesystem::temp_directory_path() / "resdual_capi_model.rdwt").string();
    REQUIRE(rd_model_save(m, path.c_str()) == RD_OK);

    rd_model* loaded = nullptr;
    REQUIRE(rd_model_load(path.c_str(), &loaded) == RD_OK);
    const std::vector<double> input = ramp(3 * 4);
    std::vector<double> a((2 + 1) * 3 * 4), b(a.size());
    REQUIRE(rd_model_forward(m, input.data(), a.data()) == RD_OK);
    REQUIRE(rd_model_forward(loaded, input.data(), b.data()) == RD_OK);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

    rd_model_release(loaded);
    rd_model_release(m);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");

    rd_model* missing = nullptr;
    CHECK(rd_model_load("/nonexistent_dir_for_tests/x.rdwt", &missing) == RD_ERR_IO);
    CHECK(contains(rd_last_error(), "cannot open"));
}

TEST_CASE("capi: argument and config failures map to status codes") {
    rd_model* m = nullptr;
    CHECK(rd_model_create(nullptr, &m) == RD_ERR_NULL_ARGUMENT);
    CHECK(contains(rd_last_error(), "must not be null"));

    rd_model_config cfg = small_config();
    CHECK(rd_model_create(&cfg, nullptr) == RD_ERR_NULL_ARGUMENT);

    cfg.L = 0;
    CHECK(rd_model_create(&cfg, &m) == RD_ERR_CONFIG);
    CHECK(m == nullptr);

    cfg = small_config();
    cfg.mixer = static_cast<rd_mixer>(99);
    CHECK(rd_model_create(&cfg, &m) == RD_ERR_PARAMETER);
    CHECK(contains(rd_last_error(), "unknown tag"));

    rd_report* rep = nullptr;
    rd_duality_opts o = random_opts();
    o.K = 0;
    CHECK(rd_duality_check(&o, &rep) == RD_ERR_CONFIG);
    CHECK(contains(rd_last_error(), "K must be"));
    CHECK(rd_duality_check(nullptr, &rep) == RD_ERR_NULL_ARGUMENT);
}

TEST_CASE("capi: duality check, full-window limit, and sweep") {
    const rd_duality_opts o = random_opts();
    rd_report* r = nullptr;
    REQUIRE(rd_duality_check(&o, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_summary(r), "max_abs_diff=0 "));
    CHECK(contains(rd_report_summary(r), "passed=yes"));
    CHECK(contains(rd_report_json(r), "\"report\": \"duality\""));
    CHECK(!contains(rd_report_json(r), "elapsed_seconds"));
    CHECK(contains(rd_report_csv(r), "t,layer0"));

    // identical inputs serialize to identical bytes
    rd_report* r2 = nullptr;
    REQUIRE(rd_duality_check(&o, &r2) == RD_OK);
    CHECK(std::string(rd_report_json(r)) == rd_report_json(r2));
    rd_report_release(r2);
    rd_report_release(r);

    rd_duality_opts timed = o;
    timed.include_timing = 1;
    REQUIRE(rd_duality_check(&timed, &r) == RD_OK);
    CHECK(contains(rd_report_json(r), "elapsed_seconds"));
    rd_report_release(r);

    rd_duality_opts fw = random_opts();
    fw.stack = RD_STACK_FORWARD;
    fw.L = 3;
    fw.T = 2;
    fw.d = 4;
    REQUIRE(rd_duality_full_window(&fw, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_summary(r), "K=4"));  // full window resolved to L+1
    CHECK(contains(rd_report_summary(r), "mode=tolerance"));
    rd_report_release(r);

    rd_duality_opts cells[2] = {random_opts(), random_opts()};
    cells[1].K = RD_WINDOW_FULL;
    REQUIRE(rd_duality_sweep(cells, 2, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_json(r), "\"report\": \"duality-sweep\""));
    CHECK(contains(rd_report_summary(r), "sweep: cells=2 passed=yes"));
    rd_report_release(r);

    CHECK(rd_duality_sweep(cells, 0, &r) == RD_ERR_PARAMETER);
}

TEST_CASE("capi: cost reports") {
    rd_report* r = nullptr;
    REQUIRE(rd_cost_flops_seq(8, 2, 4, 4, 4, 0, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_summary(r), "score_value=240"));
    CHECK(contains(rd_report_summary(r), "match=yes"));
    rd_report_release(r);

    REQUIRE(rd_cost_flops_depth(2, RD_WINDOW_FULL, 4, 4, 4, 4, 0, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_summary(r), "score_value=320"));
    rd_report_release(r);

    REQUIRE(rd_simulate_decode(RD_MIXER_SEQ_SHORTSWA, 2, 4, 8, 8, 8, 101, 8, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_summary(r), "swa_rows_per_layer=4"));
    rd_report_release(r);

    REQUIRE(rd_pipeline_transfers(RD_MIXER_DEPTH_ATTN, 8, 2, nullptr, 0, 3, &r) == RD_OK);
    CHECK(rd_report_passed(r) == 1);
    CHECK(contains(rd_report_json(r), "\"total_extra_per_token\": 2"));
    CHECK(contains(rd_report_summary(r), "total extra per token=2"));
    rd_report_release(r);

    const int64_t sizes[2] = {2, 6};
    REQUIRE(rd_pipeline_transfers(RD_MIXER_DEPTH_ATTN, 8, 2, sizes, 2, 3, &r) == RD_OK);
    CHECK(contains(rd_report_summary(r), "stages=[2,6]"));
    rd_report_release(r);

    CHECK(rd_pipeline_transfers(RD_MIXER_DEPTH_ATTN, 8, 0, nullptr, 0, 3, &r) == RD_ERR_CONFIG);
    CHECK(rd_simulate_decode(RD_MIXER_STANDARD, 2, RD_WINDOW_FULL, 4, 4, 4, 0, 8, &r) ==
          RD_ERR_PARAMETER);
}
