#include "demosync/textio.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

// End-to-end coverage of the installed binary: every invocation here goes
// through the real executable via the shell, not through library calls.

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
    if (const char* env = std::getenv("DEMOSYNC_CLI")) return env;
    char buf[4096];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    REQUIRE(n > 0);
    buf[n] = '\0';
    return (fs::path(buf).parent_path() / "demosync").string();
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs `demosync <args>` with stdout/stderr captured. env_prefix lets a test
// set environment variables for just that invocation.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const std::string base =
        (fs::temp_directory_path() /
         ("demosync_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
            .string();
    const std::string out_file = base + ".out";
    const std::string err_file = base + ".err";
    const std::string cmd = env_prefix + "'" + cli_binary() + "' " + args + " >'" + out_file +
                            "' 2>'" + err_file + "'";
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = demosync::read_file_bytes(out_file);
    r.err = demosync::read_file_bytes(err_file);
    fs::remove(out_file);
    fs::remove(err_file);
    return r;
}

std::vector<std::string> tokens_of(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Value following `key` in a whitespace-tokenized line.
std::string token_after(const std::string& text, const std::string& key) {
    const std::vector<std::string> toks = tokens_of(text);
    for (size_t i = 0; i + 1 < toks.size(); ++i)
        if (toks[i] == key) return toks[i + 1];
    return "";
}

void truncate_file(const std::string& path, size_t drop_bytes) {
    std::string bytes = demosync::read_file_bytes(path);
    REQUIRE(bytes.size() > drop_bytes);
    bytes.resize(bytes.size() - drop_bytes);
    demosync::write_file_bytes(path, bytes);
}

}  // namespace

TEST_CASE("cli: no arguments prints help and exits 2") {
    const CliResult r = run_cli("");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
}

TEST_CASE("cli: unknown flags exit 2") {
    const CliResult r = run_cli("simulate --no-such-flag");
    CHECK(r.exit_code == 2);
}

TEST_CASE("cli: missing input surfaces as an ERROR line and exit 1") {
    testutil::TempDir tmp;
    const std::string missing = tmp.sub("missing_ep");
    const CliResult r = run_cli("inspect '" + missing + "'");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("ERROR IoError") != std::string::npos);
    CHECK(r.err.find("missing_ep") != std::string::npos);

    const CliResult r2 =
        run_cli("eval --episode '" + missing + "' --truth '" + tmp.sub("no_truth.txt") + "'");
    CHECK(r2.exit_code == 1);
    CHECK(r2.err.find("ERROR ") != std::string::npos);
    // ERROR lines are "ERROR <CamelCase code> <context>".
    const std::vector<std::string> toks = tokens_of(r2.err.substr(r2.err.find("ERROR ")));
    REQUIRE(toks.size() >= 2);
    CHECK(toks[0] == "ERROR");
    CHECK(std::isupper(static_cast<unsigned char>(toks[1][0])) != 0);
}

TEST_CASE("cli: simulate, calibrate, process, inspect, eval chain") {
    testutil::TempDir tmp;
    const std::string scenario = tmp.sub("sweep.txt");
    demosync::write_file_bytes(scenario,
                               "kind scenario\n"
                               "seed 11\n"
                               "duration 6\n"
                               "sweep_freq 1\n"
                               "latency_pose 0.12\n"
                               "calibration_sweep 1\n"
                               "encoder_hz 0\n"
                               "tactile_hz 0\n");
    const std::string sess = tmp.sub("sess");
    const std::string truth = tmp.sub("truth.txt");

    // simulate
    const CliResult sim =
        run_cli("simulate --scenario '" + scenario + "' --out '" + sess + "' --truth '" + truth +
                "'");
    REQUIRE(sim.exit_code == 0);
    CHECK(sim.err.find("poses 361") != std::string::npos);
    CHECK(fs::exists(sess + "/header.txt"));
    CHECK(fs::exists(sess + "/pose.log"));
    CHECK(fs::exists(sess + "/marker.log"));
    CHECK(!fs::exists(sess + "/encoder.log"));
    CHECK(fs::exists(truth));

    // simulate is deterministic: the same scenario writes an identical session.
    const std::string sess2 = tmp.sub("sess2");
    REQUIRE(run_cli("simulate --scenario '" + scenario + "' --out '" + sess2 + "'").exit_code ==
            0);
    CHECK(testutil::dirs_identical(sess, sess2));

    // calibrate-latency recovers the injected 0.12 s
    const std::string lat = tmp.sub("latency.txt");
    const std::string plot = tmp.sub("align.svg");
    const CliResult cal = run_cli("calibrate-latency --session '" + sess + "' --out '" + lat +
                                  "' --plot '" + plot + "'");
    REQUIRE(cal.exit_code == 0);
    const double delta = demosync::parse_double(token_after(cal.out, "delta_s"), "delta");
    CHECK(std::fabs(delta - 0.12) < 5e-4);
    const demosync::KvFile lat_kv = demosync::KvFile::load(lat);
    CHECK(lat_kv.get("kind", "ParseError") == "latency");
    CHECK(std::fabs(lat_kv.get_double("delta_s", "ParseError") - delta) == 0.0);
    CHECK(demosync::read_file_bytes(plot).find("<svg") == 0);

    // environment variable supplies the session directory
    const CliResult env_cal =
        run_cli("calibrate-latency", "DEMOSYNC_SESSION_DIR='" + sess + "' ");
    CHECK(env_cal.exit_code == 0);
    CHECK(std::fabs(demosync::parse_double(token_after(env_cal.out, "delta_s"), "d") - delta) ==
          0.0);

    // process with the latency file
    const std::string ep = tmp.sub("ep");
    const CliResult proc = run_cli("process --session '" + sess + "' --latency '" + lat +
                                   "' --out '" + ep + "' --quiet");
    REQUIRE(proc.exit_code == 0);
    CHECK(proc.err.empty());  // --quiet silences the info lines
    const long frames = demosync::parse_long(token_after(proc.out, "frames"), "frames");
    CHECK(frames >= 170);
    CHECK(frames <= 181);
    CHECK(fs::exists(ep + "/manifest.txt"));

    // process is deterministic too
    const std::string ep2 = tmp.sub("ep2");
    REQUIRE(run_cli("process --session '" + sess + "' --latency '" + lat + "' --out '" + ep2 +
                    "' --quiet")
                .exit_code == 0);
    CHECK(testutil::dirs_identical(ep, ep2));

    // inspect prints the manifest and coverage summary
    const CliResult ins = run_cli("inspect '" + ep + "'");
    REQUIRE(ins.exit_code == 0);
    CHECK(ins.out.find("format_version 1") != std::string::npos);
    CHECK(ins.out.find("manifest_crc32") != std::string::npos);
    CHECK(ins.out.find("frames " + std::to_string(frames)) != std::string::npos);
    CHECK(ins.out.find("width_coverage 0\n") != std::string::npos);  // encoder disabled

    // eval scores the episode against the recorded truth
    const std::string eval_csv = tmp.sub("eval.csv");
    const std::string err_plot = tmp.sub("errors.svg");
    const CliResult ev = run_cli("eval --episode '" + ep + "' --truth '" + truth + "' --out '" +
                                 eval_csv + "' --plot '" + err_plot + "'");
    REQUIRE(ev.exit_code == 0);
    const std::vector<std::string> rows = lines_of(demosync::read_file_bytes(eval_csv));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].find("pos_mean_x_mm") == 0);
    std::vector<std::string> cells;
    {
        std::string cur;
        for (char c : rows[1]) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else
                cur += c;
        }
        cells.push_back(cur);
    }
    REQUIRE(cells.size() == 11);
    CHECK(demosync::parse_double(cells[0], "x") < 1.0);    // mean |dx| under 1 mm
    CHECK(demosync::parse_double(cells[9], "lat") < 0.5);  // latency residual under 0.5 ms
    CHECK(demosync::parse_long(cells[10], "frames") == frames);
    CHECK(demosync::read_file_bytes(err_plot).find("<svg") == 0);
}

TEST_CASE("cli: report tabulates a wildcard batch including an unusable session") {
    testutil::TempDir tmp;
    const std::string scenario = tmp.sub("sc.txt");
    demosync::write_file_bytes(scenario,
                               "duration 2\nsweep_freq 1\nencoder_hz 0\ntactile_hz 0\n");
    const std::string batch = tmp.sub("batch");
    fs::create_directories(batch);
    REQUIRE(run_cli("simulate --scenario '" + scenario + "' --out '" + batch + "/run1'")
                .exit_code == 0);
    REQUIRE(run_cli("simulate --scenario '" + scenario + "' --out '" + batch + "/run2'")
                .exit_code == 0);
    fs::remove(batch + "/run2/pose.log");  // run2 can no longer build an episode

    const std::string csv_path = tmp.sub("report.csv");
    const CliResult rep =
        run_cli("report --sessions '" + batch + "/run*' --out '" + csv_path + "'");
    REQUIRE(rep.exit_code == 0);
    const std::vector<std::string> rows = lines_of(demosync::read_file_bytes(csv_path));
    REQUIRE(rows.size() == 4);  // header, run1, run2, TOTAL
    CHECK(rows[1].find(",1,ok,") != std::string::npos);
    CHECK(rows[2].find(",0,MissingStream") != std::string::npos);
    CHECK(rows[3].find("TOTAL,0.5,usable_fraction,") == 0);
    CHECK(rep.err.find("stream log missing") != std::string::npos);
}

TEST_CASE("cli: damaged logs are tolerated by default and fatal under --strict") {
    testutil::TempDir tmp;
    const std::string scenario = tmp.sub("sc.txt");
    demosync::write_file_bytes(scenario,
                               "duration 2\nsweep_freq 1\nencoder_hz 0\ntactile_hz 0\n");
    const std::string sess = tmp.sub("sess");
    REQUIRE(run_cli("simulate --scenario '" + scenario + "' --out '" + sess + "'").exit_code ==
            0);
    truncate_file(sess + "/pose.log", 10);

    const std::string ep = tmp.sub("ep");
    const CliResult ok = run_cli("process --session '" + sess + "' --out '" + ep + "'");
    CHECK(ok.exit_code == 0);
    CHECK(ok.err.find("pose.log truncated at byte") != std::string::npos);
    CHECK(fs::exists(ep + "/manifest.txt"));

    const CliResult strict = run_cli("process --session '" + sess + "' --strict --out '" +
                                     tmp.sub("ep_strict") + "'");
    CHECK(strict.exit_code == 1);
    CHECK(strict.err.find("ERROR CorruptLog") != std::string::npos);
    CHECK(!fs::exists(tmp.sub("ep_strict")));
}

TEST_CASE("cli: gripper and controller calibration files round-trip through the tools") {
    testutil::TempDir tmp;
    const std::string readings = tmp.sub("readings.txt");
    // raw encoder count -> width rows, one sweep crossing the 4096 wrap.
    demosync::write_file_bytes(readings,
                               "3900 0.0\n4000 0.01\n4050 0.02\n20 0.03\n120 0.04\n");
    const std::string grip = tmp.sub("gripper.txt");
    const CliResult cg =
        run_cli("calibrate-gripper --readings '" + readings + "' --out '" + grip + "'");
    REQUIRE(cg.exit_code == 0);
    CHECK(cg.out.find("digest ") == 0);
    const demosync::KvFile grip_kv = demosync::KvFile::load(grip);
    CHECK(grip_kv.get("kind", "ParseError") == "gripper");

    const std::string recorded = tmp.sub("recorded.txt");
    demosync::write_file_bytes(recorded, "1 0 0 0 0.01 -0.02 0.005\n");
    const std::string ctrl = tmp.sub("controller.txt");
    const CliResult cc =
        run_cli("calibrate-controller --recorded '" + recorded + "' --out '" + ctrl + "'");
    REQUIRE(cc.exit_code == 0);
    CHECK(cc.out.find("digest ") == 0);
    const demosync::KvFile ctrl_kv = demosync::KvFile::load(ctrl);
    CHECK(ctrl_kv.get("kind", "ParseError") == "controller");

    // Both calibrations feed process without complaint.
    const std::string scenario = tmp.sub("sc.txt");
    demosync::write_file_bytes(scenario, "duration 2\nsweep_freq 1\ntactile_hz 0\n");
    const std::string sess = tmp.sub("sess");
    REQUIRE(run_cli("simulate --scenario '" + scenario + "' --out '" + sess + "'").exit_code ==
            0);
    const CliResult proc = run_cli("process --session '" + sess + "' --gripper-cal '" + grip +
                                   "' --controller-cal '" + ctrl + "' --out '" + tmp.sub("ep") +
                                   "'");
    CHECK(proc.exit_code == 0);
}

TEST_CASE("cli: hub records an empty session when stdin closes immediately") {
    testutil::TempDir tmp;
    const std::string dir = tmp.sub("hub_sess");
    static int hub_counter = 0;
    const std::string out_file =
        (fs::temp_directory_path() /
         ("demosync_hub_" + std::to_string(::getpid()) + "_" + std::to_string(hub_counter++)))
            .string();
    const std::string cmd = "'" + cli_binary() + "' hub --session '" + dir +
                            "' --id live --listen 0 </dev/null >'" + out_file + "' 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    CHECK(WEXITSTATUS(rc) == 0);
    const std::string out = demosync::read_file_bytes(out_file);
    fs::remove(out_file);
    CHECK(out.find("listening ") == 0);
    CHECK(out.find("records 0 drops 0 protocol_errors 0") != std::string::npos);
    CHECK(fs::exists(dir + "/header.txt"));
    CHECK(demosync::read_file_bytes(dir + "/header.txt").find("session_id live") !=
          std::string::npos);
}
