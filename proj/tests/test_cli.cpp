#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::filesystem::path scratch_dir() {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() /
                 ("ctflow_cli_" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

std::filesystem::path scratch_file(const std::string& name) {
    return scratch_dir() / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const auto out_path = scratch_file("stdout_" + std::to_string(++counter));
    const auto err_path = scratch_file("stderr_" + std::to_string(counter));
    const std::string cmd = std::string("\"") + CTFLOW_BIN + "\" " + args + " > " +
                            out_path.string() + " 2> " + err_path.string();
    const int rc = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = (rc == -1) ? -1 : WEXITSTATUS(rc);
    res.out = slurp(out_path);
    res.err = slurp(err_path);
    return res;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

} // namespace

TEST_CASE("no arguments prints usage and exits 2", "[cli]") {
    auto res = run_cli("");
    REQUIRE(res.exit_code == 2);
    REQUIRE(res.err.find("surface") != std::string::npos);
    REQUIRE(res.err.find("detect") != std::string::npos);
}

TEST_CASE("bad invocations exit 2", "[cli]") {
    REQUIRE(run_cli("bogus").exit_code == 2);
    REQUIRE(run_cli("surface --model davis-skodje --gamma abc --z0 1,0.5 --re 0:0 "
                    "--im 0:1 --grid 1x4")
                .exit_code == 2);
    REQUIRE(run_cli("detect --model davis-skodje --gamma 10").exit_code == 2);
    REQUIRE(run_cli("detect --model no-such-model --gamma 10 --z0 1,1").exit_code == 2);
    REQUIRE(run_cli("spectrum --model davis-skodje --gamma 5 --z0 2,0.9 --component 3")
                .exit_code == 2);
}

TEST_CASE("help exits 0", "[cli]") {
    auto res = run_cli("--help");
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.find("sweep") != std::string::npos);
}

TEST_CASE("surface CSV output", "[cli]") {
    SECTION("periodic column on the imaginary axis") {
        const auto out = scratch_file("surface_ray.csv");
        auto res = run_cli("surface --model davis-skodje --gamma 3 --z0 2,0.9 --re 0:0 "
                           "--im 0:6.283185307179586 --grid 1x64 --out " + out.string());
        REQUIRE(res.exit_code == 0);
        auto rows = lines_of(slurp(out));
        REQUIRE(rows.size() == 65);
        REQUIRE(rows[0] == "re_t,im_t,valid,re_z1,im_z1,re_z2,im_z2");
        for (size_t r = 1; r < rows.size(); ++r) {
            auto fields = split_csv(rows[r]);
            REQUIRE(fields.size() == 7);
            REQUIRE(fields[2] == "1");
        }
        auto first = split_csv(rows[1]);
        REQUIRE(std::stod(first[0]) == 0.0);
        REQUIRE(std::stod(first[1]) == 0.0);
        REQUIRE(std::stod(first[3]) == 2.0);
        REQUIRE(std::stod(first[5]) == 0.9);
    }

    SECTION("degenerate 1x1 grid echoes the anchor") {
        const auto out = scratch_file("surface_cell.csv");
        auto res = run_cli("surface --model davis-skodje --gamma 3 --z0 2,0.9 --re 0:0 "
                           "--im 0:0 --grid 1x1 --out " + out.string());
        REQUIRE(res.exit_code == 0);
        auto rows = lines_of(slurp(out));
        REQUIRE(rows.size() == 2);
        auto fields = split_csv(rows[1]);
        REQUIRE(std::stod(fields[3]) == 2.0);
        REQUIRE(std::stod(fields[4]) == 0.0);
        REQUIRE(std::stod(fields[5]) == 0.9);
    }

    SECTION("pole column is masked beyond the pole without aborting") {
        const auto out = scratch_file("surface_pole.csv");
        auto res = run_cli("surface --model davis-skodje --gamma 3 --z0 1,0.5 --re 0:0 "
                           "--im 0:6.283185307179586 --grid 1x64 --out " + out.string());
        REQUIRE(res.exit_code == 0);
        auto rows = lines_of(slurp(out));
        REQUIRE(rows.size() == 65);
        bool seen_invalid = false;
        int invalid_count = 0;
        for (size_t r = 1; r < rows.size(); ++r) {
            auto fields = split_csv(rows[r]);
            if (fields[2] == "0") {
                seen_invalid = true;
                ++invalid_count;
                REQUIRE(std::stod(fields[3]) == 0.0);
                REQUIRE(std::stod(fields[5]) == 0.0);
                REQUIRE(std::stod(fields[1]) >= 3.0);
            } else {
                REQUIRE(!seen_invalid);
            }
        }
        REQUIRE(invalid_count > 10);
    }

    SECTION("anchor outside the grid exits 2") {
        auto res = run_cli("surface --model davis-skodje --gamma 3 --z0 2,0.9 --re 1:2 "
                           "--im 0:1 --grid 3x3");
        REQUIRE(res.exit_code == 2);
    }
}

TEST_CASE("spectrum JSON output", "[cli]") {
    SECTION("davis-skodje comb with the fast line") {
        const auto out = scratch_file("spectrum_ds.json");
        auto res = run_cli("spectrum --model davis-skodje --gamma 5 "
                           "--z0 2,0.9666666666666667 --tau-max 50.26548245743669 "
                           "--n 512 --component 2 --out " + out.string());
        REQUIRE(res.exit_code == 0);
        json j = json::parse(slurp(out));
        REQUIRE(j["model"] == "davis-skodje");
        REQUIRE(j["component"] == 2);
        REQUIRE(j["convention"] == "e^-i xi tau / sqrt(2pi)");
        REQUIRE(j["window"] == "rectangular");
        REQUIRE(j["z0"].size() == 2);
        REQUIRE(j["z0"][0]["re"].get<double>() == 2.0);
        REQUIRE(j["z0"][0]["im"].get<double>() == 0.0);
        REQUIRE(j["T"].get<double>() == Catch::Approx(50.26548245743669).epsilon(1e-12));
        REQUIRE(j["delta_xi"].get<double>() == Catch::Approx(0.125).epsilon(1e-12));

        auto freqs = j["frequencies"].get<std::vector<double>>();
        auto re_amp = j["re_amp"].get<std::vector<double>>();
        auto im_amp = j["im_amp"].get<std::vector<double>>();
        REQUIRE(freqs.size() == 512);
        REQUIRE(re_amp.size() == 512);
        REQUIRE(im_amp.size() == 512);
        REQUIRE(freqs.front() == Catch::Approx(-32.0).epsilon(1e-12));
        REQUIRE(freqs[256] == 0.0);

        size_t fast = 0;
        for (size_t m = 0; m < freqs.size(); ++m)
            if (std::abs(freqs[m] + 5.0) < 1e-9) fast = m;
        REQUIRE(re_amp[fast] == Catch::Approx(0.3).margin(1e-3));
        REQUIRE(im_amp[fast] == Catch::Approx(0.0).margin(1e-3));
    }

    SECTION("michaelis-menten defaults to the hann window") {
        const auto out = scratch_file("spectrum_mm.json");
        auto res = run_cli("spectrum --model michaelis-menten --gamma 10 --z0 0.5,0.3 "
                           "--tau-max 31.41592653589793 --n 256 --component 1 --out " +
                           out.string());
        REQUIRE(res.exit_code == 0);
        json j = json::parse(slurp(out));
        REQUIRE(j["window"] == "hann");
        REQUIRE(j["model"] == "michaelis-menten");
    }

    SECTION("window flag overrides the default") {
        const auto out = scratch_file("spectrum_hann.json");
        auto res = run_cli("spectrum --model davis-skodje --gamma 5 --z0 2,0.9 "
                           "--n 256 --component 2 --window hann --out " + out.string());
        REQUIRE(res.exit_code == 0);
        REQUIRE(json::parse(slurp(out))["window"] == "hann");
    }

    SECTION("zero signal exits 3") {
        auto res = run_cli("spectrum --model davis-skodje --gamma 5 --z0 0,0 --n 64");
        REQUIRE(res.exit_code == 3);
    }
}

TEST_CASE("detect exit codes and report", "[cli]") {
    SECTION("on-SIM point exits 0") {
        const auto out = scratch_file("detect_on.json");
        auto res = run_cli("detect --model davis-skodje --gamma 10 "
                           "--z0 2.5,0.7142857142857143 --out " + out.string());
        REQUIRE(res.exit_code == 0);
        json j = json::parse(slurp(out));
        REQUIRE(j["verdict"] == "on_sim_consistent");
        REQUIRE(j["high_low_ratio"].get<double>() < 1e-3);
        REQUIRE(j["cutoff_used"].get<double>() == Catch::Approx(std::sqrt(10.0)));
        REQUIRE(j["model"] == "davis-skodje");
    }

    SECTION("off-SIM point exits 4") {
        const auto out = scratch_file("detect_off.json");
        auto res = run_cli("detect --model davis-skodje --gamma 10 "
                           "--z0 2.5,1.1142857142857143 --out " + out.string());
        REQUIRE(res.exit_code == 4);
        json j = json::parse(slurp(out));
        REQUIRE(j["verdict"] == "off_sim");
        REQUIRE(j["high_low_ratio"].get<double>() > 1e-3);
        REQUIRE(!j["peaks"].empty());
    }

    SECTION("pole family exits 3") {
        auto res = run_cli("detect --model davis-skodje --gamma 10 --z0 1,0.5");
        REQUIRE(res.exit_code == 3);
    }

    SECTION("fixed point reports zero energy and exits 0") {
        const auto out = scratch_file("detect_fp.json");
        auto res = run_cli("detect --model davis-skodje --gamma 10 --z0 0,0 --out " +
                           out.string());
        REQUIRE(res.exit_code == 0);
        json j = json::parse(slurp(out));
        REQUIRE(j["high_low_ratio"].get<double>() == 0.0);
        REQUIRE(j["low_energy"].get<double>() == 0.0);
    }
}

TEST_CASE("config file handling", "[cli]") {
    SECTION("echoed config reproduces the run byte for byte") {
        const auto out1 = scratch_file("rt1.json");
        const auto out2 = scratch_file("rt2.json");
        const auto cfg = scratch_file("rt_config.json");

        auto first = run_cli("detect --model davis-skodje --gamma 10 "
                             "--z0 2.5,0.7142857142857143 --cutoff 2.5 --n 256 "
                             "--echo-config --out " + out1.string());
        REQUIRE(first.exit_code == 0);
        REQUIRE(!first.out.empty());
        spit(cfg, first.out);

        auto second = run_cli("detect --config " + cfg.string() + " --echo-config --out " +
                              out2.string());
        REQUIRE(second.exit_code == 0);
        REQUIRE(second.out == first.out);
        REQUIRE(slurp(out2) == slurp(out1));
    }

    SECTION("unknown keys are rejected") {
        const auto cfg = scratch_file("bad_config.json");
        spit(cfg, R"({"model":"davis-skodje","gamma":10,"z0":[2.5,0.72],"cutof":2.0})");
        auto res = run_cli("detect --config " + cfg.string());
        REQUIRE(res.exit_code == 2);
        REQUIRE(res.err.find("unknown config key") != std::string::npos);
    }

    SECTION("explicit flags override config values") {
        const auto cfg = scratch_file("override_config.json");
        spit(cfg, R"({"model":"davis-skodje","gamma":3,"z0":[2.5,0.7142857142857143]})");
        auto res = run_cli("detect --config " + cfg.string() + " --gamma 10 --echo-config "
                           "--out " + scratch_file("override_out.json").string());
        REQUIRE(res.exit_code == 0);
        json echo = json::parse(res.out);
        REQUIRE(echo["gamma"].get<double>() == 10.0);
        REQUIRE(echo["model"] == "davis-skodje");
    }

    SECTION("malformed config exits 2") {
        const auto cfg = scratch_file("broken_config.json");
        spit(cfg, "{not json");
        REQUIRE(run_cli("detect --config " + cfg.string()).exit_code == 2);
        REQUIRE(run_cli("detect --config /no/such/file.json").exit_code == 2);
    }
}

TEST_CASE("sweep CSV output", "[cli]") {
    SECTION("ratio grows with the offset") {
        const auto out = scratch_file("sweep_offsets.csv");
        auto res = run_cli("sweep --model davis-skodje --gamma 10 "
                           "--offsets 0,0.1,0.2,0.3 --out " + out.string());
        REQUIRE(res.exit_code == 0);
        auto rows = lines_of(slurp(out));
        REQUIRE(rows.size() == 5);
        REQUIRE(rows[0] == "offset,gamma,high_low_ratio,lambda_supp,verdict");
        double prev = -1.0;
        for (size_t r = 1; r < rows.size(); ++r) {
            auto fields = split_csv(rows[r]);
            REQUIRE(fields.size() == 5);
            REQUIRE(std::stod(fields[1]) == 10.0);
            const double ratio = std::stod(fields[2]);
            REQUIRE(ratio >= prev);
            prev = ratio;
        }
        REQUIRE(split_csv(rows[1])[4] == "on_sim_consistent");
        REQUIRE(split_csv(rows[4])[4] == "off_sim");
    }

    SECTION("spectral support tracks gamma") {
        const auto out = scratch_file("sweep_gammas.csv");
        auto res = run_cli("sweep --model davis-skodje --gammas 5,10,20 --offsets 0.3 "
                           "--out " + out.string());
        REQUIRE(res.exit_code == 0);
        auto rows = lines_of(slurp(out));
        REQUIRE(rows.size() == 4);
        for (size_t r = 1; r < rows.size(); ++r) {
            auto fields = split_csv(rows[r]);
            const double gamma = std::stod(fields[1]);
            const double supp = std::stod(fields[3]);
            REQUIRE(supp == Catch::Approx(gamma).margin(1.0));
            REQUIRE(fields[4] == "off_sim");
        }
    }

    SECTION("offsets are required") {
        REQUIRE(run_cli("sweep --model davis-skodje --gamma 10").exit_code == 2);
    }
}

TEST_CASE("validate command", "[cli]") {
    SECTION("default tolerances pass") {
        auto res = run_cli("validate");
        REQUIRE(res.exit_code == 0);
        auto rows = lines_of(res.out);
        REQUIRE(rows.size() == 4);
        for (const auto& row : rows) REQUIRE(row.rfind("PASS", 0) == 0);
    }

    SECTION("hopeless tolerance fails") {
        auto res = run_cli("validate --rtol 1");
        REQUIRE(res.exit_code == 1);
        REQUIRE(res.out.find("FAIL") != std::string::npos);
    }
}
