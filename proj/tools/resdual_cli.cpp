// resdual — command-line driver for the duality checks and cost models.
// Talks to the core exclusively through the C API in resdual.h.
//
// Exit codes: 0 success, 1 a check failed (worst cell printed), 2 bad usage
// or configuration. Reports are deterministic: identical invocations write
// byte-identical JSON. RESDUAL_OUT_DIR sets the default output directory;
// --out-dir overrides it.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "resdual.h"

namespace {

struct OutOpts {
    std::string out;
    std::string out_dir;
    std::string format = "table";
};

void add_out_opts(CLI::App* cmd, OutOpts& o) {
    cmd->add_option("--out", o.out, "write the report to this file (default: print to stdout)");
    cmd->add_option("--out-dir", o.out_dir,
                    "directory for relative --out paths (default: $RESDUAL_OUT_DIR)");
    cmd->add_option("--format", o.format, "report format")
        ->check(CLI::IsMember({"json", "csv", "table"}))
        ->capture_default_str();
}

// "full" or a base-10 integer; semantic range checks happen in the library
bool parse_window(const std::string& s, int64_t& out) {
    if (s == "full") {
        out = RD_WINDOW_FULL;
        return true;
    }
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') return false;
    out = v;
    return true;
}

bool parse_mixer(const std::string& s, rd_mixer& out) {
    if (s == "standard") out = RD_MIXER_STANDARD;
    else if (s == "seq-swa") out = RD_MIXER_SEQ_SHORTSWA;
    else if (s == "depth-attn") out = RD_MIXER_DEPTH_ATTN;
    else if (s == "elc") out = RD_MIXER_ELC;
    else if (s == "denseformer") out = RD_MIXER_DENSEFORMER;
    else return false;
    return true;
}

int usage_error(const std::string& msg) {
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 2;
}

int api_error() {
    std::fprintf(stderr, "error: %s\n", rd_last_error());
    return 2;
}

bool write_atomic(const std::string& path, const char* content) {
    const std::string tmp = path + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) return false;
    const size_t len = std::strlen(content);
    const bool ok = std::fwrite(content, 1, len, f) == len;
    if (std::fclose(f) != 0 || !ok) return false;
    return std::rename(tmp.c_str(), path.c_str()) == 0;
}

std::string resolve_out_path(const OutOpts& o) {
    if (o.out.empty() || o.out.front() == '/') return o.out;
    std::string dir = o.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("RESDUAL_OUT_DIR");
        if (env) dir = env;
    }
    if (dir.empty()) return o.out;
    if (dir.back() != '/') dir += '/';
    return dir + o.out;
}

// prints/writes the report, releases it, returns the process exit code
int emit(rd_report* rep, const OutOpts& o) {
    const char* content = o.format == "json"  ? rd_report_json(rep)
                          : o.format == "csv" ? rd_report_csv(rep)
                                              : rd_report_summary(rep);
    const std::string path = resolve_out_path(o);
    if (path.empty()) {
        std::fputs(content, stdout);
    } else {
        if (!write_atomic(path, content)) {
            rd_report_release(rep);
            return usage_error("cannot write " + path);
        }
        std::fputs(rd_report_summary(rep), stdout);
        std::printf("wrote %s\n", path.c_str());
    }
    const int rc = rd_report_passed(rep) ? 0 : 1;
    if (rc != 0 && o.format != "table" && path.empty())
        std::fputs(rd_report_summary(rep), stderr);  // the worst cell, human-readable
    rd_report_release(rep);
    return rc;
}

struct DualityArgs {
    int64_t L = 4, T = 8, d = 8;
    std::vector<std::string> ks{"full"};
    std::vector<uint64_t> seeds{0};
    std::string mode = "bit-exact";
    std::string dtype = "f64";
    double tolerance = -1.0;
    std::string stack = "forward";
    std::string mixer = "standard";
    std::string mixer_window = "full";
    bool include_timing = false;
    OutOpts out;
};

int run_verify_duality(const DualityArgs& a) {
    rd_duality_opts base{};
    base.L = a.L;
    base.T = a.T;
    base.d = a.d;
    if (!parse_mixer(a.mixer, base.mixer)) return usage_error("mixer: unknown '" + a.mixer + "'");
    if (!parse_window(a.mixer_window, base.mixer_window))
        return usage_error("mixer-window: expected an integer or 'full', got '" + a.mixer_window +
                           "'");
    if (a.stack == "forward") base.stack = RD_STACK_FORWARD;
    else if (a.stack == "random") base.stack = RD_STACK_RANDOM;
    else return usage_error("stack: unknown '" + a.stack + "'");
    if (a.mode == "bit-exact") base.mode = RD_CHECK_BIT_EXACT;
    else if (a.mode == "tolerance") base.mode = RD_CHECK_TOLERANCE;
    else return usage_error("mode: unknown '" + a.mode + "'");
    if (a.dtype == "f64") base.dtype = RD_DTYPE_F64;
    else if (a.dtype == "f32") base.dtype = RD_DTYPE_F32;
    else return usage_error("dtype: unknown '" + a.dtype + "'");
    base.tolerance = a.tolerance;
    base.include_timing = a.include_timing ? 1 : 0;

    std::vector<rd_duality_opts> cells;
    for (const std::string& ks : a.ks) {
        int64_t k = 0;
        if (!parse_window(ks, k))
            return usage_error("K: expected an integer or 'full', got '" + ks + "'");
        for (uint64_t seed : a.seeds) {
            rd_duality_opts cell = base;
            cell.K = k;
            cell.seed = seed;
            cells.push_back(cell);
        }
    }

    rd_report* rep = nullptr;
    const rd_status st = cells.size() == 1 ? rd_duality_check(&cells[0], &rep)
                                           : rd_duality_sweep(cells.data(), cells.size(), &rep);
    if (st != RD_OK) return api_error();
    return emit(rep, a.out);
}

struct CostArgs {
    std::string mixer;
    int64_t T = 8, L = 4, d = 4, dk = 0, dv = 0;
    std::string w = "2";
    std::string k = "full";
    uint64_t seed = 0;
    OutOpts out;
};

int run_cost(const CostArgs& a) {
    const int64_t dk = a.dk > 0 ? a.dk : a.d;
    const int64_t dv = a.dv > 0 ? a.dv : a.d;
    rd_report* rep = nullptr;
    rd_status st;
    if (a.mixer == "seq-swa") {
        int64_t w = 0;
        if (!parse_window(a.w, w))
            return usage_error("w: expected an integer or 'full', got '" + a.w + "'");
        st = rd_cost_flops_seq(a.T, w, a.d, dk, dv, a.seed, &rep);
    } else if (a.mixer == "depth-attn") {
        int64_t k = 0;
        if (!parse_window(a.k, k))
            return usage_error("K: expected an integer or 'full', got '" + a.k + "'");
        st = rd_cost_flops_depth(a.T, k, a.L, a.d, dk, dv, a.seed, &rep);
    } else {
        return usage_error("mixer: unknown '" + a.mixer + "' (flop models: seq-swa, depth-attn)");
    }
    if (st != RD_OK) return api_error();
    return emit(rep, a.out);
}

struct SimulateArgs {
    bool decode = false;
    bool pipeline = false;
    std::string mixer;
    int64_t L = 8, d = 4, dk = 0, dv = 0;
    std::string w = "4";
    std::string k = "full";
    int64_t steps = 16;
    int64_t bytes_per_scalar = 8;
    int64_t P = 2;
    std::string partition;
    OutOpts out;
};

int run_simulate(const SimulateArgs& a) {
    if (a.decode == a.pipeline)
        return usage_error("simulate: pass exactly one of --decode, --pipeline");
    rd_report* rep = nullptr;
    if (a.decode) {
        rd_mixer mixer;
        const std::string name = a.mixer.empty() ? "seq-swa" : a.mixer;
        if (!parse_mixer(name, mixer)) return usage_error("mixer: unknown '" + name + "'");
        const bool seq = mixer == RD_MIXER_SEQ_SHORTSWA;
        int64_t window = 0;
        const std::string& ws = seq ? a.w : a.k;
        if (!parse_window(ws, window))
            return usage_error(std::string(seq ? "w" : "K") + ": expected an integer or 'full'," +
                               " got '" + ws + "'");
        const int64_t dk = a.dk > 0 ? a.dk : a.d;
        const int64_t dv = a.dv > 0 ? a.dv : a.d;
        if (rd_simulate_decode(mixer, a.L, window, a.d, dk, dv, a.steps, a.bytes_per_scalar,
                               &rep) != RD_OK)
            return api_error();
    } else {
        rd_mixer mixer;
        const std::string name = a.mixer.empty() ? "depth-attn" : a.mixer;
        if (!parse_mixer(name, mixer)) return usage_error("mixer: unknown '" + name + "'");
        int64_t k = 0;
        if (!parse_window(a.k, k))
            return usage_error("K: expected an integer or 'full', got '" + a.k + "'");
        std::vector<int64_t> sizes;
        if (!a.partition.empty()) {
            size_t pos = 0;
            while (pos <= a.partition.size()) {
                const size_t comma = a.partition.find(',', pos);
                const std::string part =
                    a.partition.substr(pos, comma == std::string::npos ? comma : comma - pos);
                int64_t v = 0;
                if (!parse_window(part, v) || v == RD_WINDOW_FULL)
                    return usage_error("partition: expected comma-separated stage sizes, got '" +
                                       a.partition + "'");
                sizes.push_back(v);
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
        }
        if (rd_pipeline_transfers(mixer, a.L, a.P, sizes.empty() ? nullptr : sizes.data(),
                                  sizes.size(), k, &rep) != RD_OK)
            return api_error();
    }
    return emit(rep, a.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"residual-stream duality laboratory"};
    app.set_version_flag("--version", rd_version());
    app.require_subcommand(1);

    DualityArgs da;
    CLI::App* verify = app.add_subcommand(
        "verify-duality", "check depth reads against windowed attention over trajectories");
    verify->add_option("--L", da.L, "layer count")->capture_default_str();
    verify->add_option("--T", da.T, "token count")->capture_default_str();
    verify->add_option("--d", da.d, "model width")->capture_default_str();
    verify->add_option("--K", da.ks, "depth window(s) under test, integer or 'full'")
        ->capture_default_str();
    verify->add_option("--seed", da.seeds, "seed(s)")->capture_default_str();
    verify->add_option("--mode", da.mode, "bit-exact | tolerance")->capture_default_str();
    verify->add_option("--dtype", da.dtype, "f64 | f32")->capture_default_str();
    verify->add_option("--tolerance", da.tolerance, "override the dtype default bound");
    verify->add_option("--stack", da.stack, "forward | random")->capture_default_str();
    verify->add_option("--mixer", da.mixer, "model for forward stacks")->capture_default_str();
    verify->add_option("--mixer-window", da.mixer_window, "that model's own w/K")
        ->capture_default_str();
    verify->add_flag("--timing", da.include_timing, "include wall time in JSON output");
    add_out_opts(verify, da.out);

    CostArgs ca;
    CLI::App* cost = app.add_subcommand("cost", "flop formulas vs instrumented counters");
    cost->add_option("--mixer", ca.mixer, "seq-swa | depth-attn")->required();
    cost->add_option("--T", ca.T, "token count")->capture_default_str();
    cost->add_option("--w", ca.w, "sequence window, integer or 'full'")->capture_default_str();
    cost->add_option("--K", ca.k, "depth window, integer or 'full'")->capture_default_str();
    cost->add_option("--L", ca.L, "layer count (depth-attn)")->capture_default_str();
    cost->add_option("--d", ca.d, "model width")->capture_default_str();
    cost->add_option("--dk", ca.dk, "key width (default d)");
    cost->add_option("--dv", ca.dv, "value width (default d)");
    cost->add_option("--seed", ca.seed, "seed for the counter run")->capture_default_str();
    add_out_opts(cost, ca.out);

    SimulateArgs sa;
    CLI::App* simulate = app.add_subcommand("simulate", "decode cache / pipeline transfers");
    simulate->add_flag("--decode", sa.decode, "simulate autoregressive decode caching");
    simulate->add_flag("--pipeline", sa.pipeline, "account pipeline-stage transfers");
    simulate->add_option("--mixer", sa.mixer, "block variant (default: seq-swa / depth-attn)");
    simulate->add_option("--L", sa.L, "layer count")->capture_default_str();
    simulate->add_option("--w", sa.w, "sequence window (decode, seq-swa)")->capture_default_str();
    simulate->add_option("--K", sa.k, "depth window")->capture_default_str();
    simulate->add_option("--d", sa.d, "model width")->capture_default_str();
    simulate->add_option("--dk", sa.dk, "key width (default d)");
    simulate->add_option("--dv", sa.dv, "value width (default d)");
    simulate->add_option("--steps", sa.steps, "decode steps")->capture_default_str();
    simulate->add_option("--bytes-per-scalar", sa.bytes_per_scalar, "for byte totals")
        ->capture_default_str();
    simulate->add_option("--P", sa.P, "pipeline stage count")->capture_default_str();
    simulate->add_option("--partition", sa.partition, "stage sizes, e.g. 4,4 (default: even)");
    add_out_opts(simulate, sa.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints usage, exit 0
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (verify->parsed()) return run_verify_duality(da);
    if (cost->parsed()) return run_cost(ca);
    if (simulate->parsed()) return run_simulate(sa);
    return usage_error("no subcommand");
}
