#include "demosync/cli.hpp"

#include "demosync/calibration.hpp"
#include "demosync/episode.hpp"
#include "demosync/error.hpp"
#include "demosync/hub.hpp"
#include "demosync/latency.hpp"
#include "demosync/report.hpp"
#include "demosync/session.hpp"
#include "demosync/simulator.hpp"
#include "demosync/textio.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace demosync {

namespace {

void info(bool quiet, const std::string& line) {
    if (!quiet) std::fprintf(stderr, "%s\n", line.c_str());
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty())
        std::fwrite(text.data(), 1, text.size(), stdout);
    else
        write_file_bytes(out_path, text);
}

// Latency calibration result file ("key value" lines).
void write_latency_file(const std::string& path, const LatencyEstimate& est, bool flipped,
                        const std::string& axis) {
    KvFile kv;
    kv.add("format_version", "1");
    kv.add("kind", "latency");
    kv.add("delta_s", fmt_g17(est.delta_star));
    kv.add("residual_mse", fmt_g17(est.residual_mse));
    kv.add("overlap_fraction", fmt_g17(est.overlap_fraction));
    kv.add_long("passes", est.passes);
    kv.add_long("flipped", flipped ? 1 : 0);
    kv.add("axis", axis);
    kv.save(path);
}

LatencyEstimate read_latency_file(const std::string& path) {
    const KvFile kv = KvFile::load(path);
    if (kv.get_or("kind", "latency") != "latency")
        throw Error("ParseError", path + ": file kind is not 'latency'");
    LatencyEstimate est;
    est.delta_star = kv.get_double("delta_s", "ParseError");
    est.residual_mse = kv.get_double_or("residual_mse", 0.0);
    est.overlap_fraction = kv.get_double_or("overlap_fraction", 0.0);
    est.passes = static_cast<int>(kv.get_long_or("passes", 0));
    return est;
}

Trajectory1D marker_component(const std::vector<MarkerSample>& samples, Axis axis) {
    if (axis == Axis::Z)
        throw Error("InvalidConfig", "the marker stream has only u/v components; use x or y");
    Trajectory1D tr;
    tr.times.reserve(samples.size());
    tr.values.reserve(samples.size());
    for (const MarkerSample& m : samples) {
        tr.times.push_back(m.t);
        tr.values.push_back(axis == Axis::X ? m.u : m.v);
    }
    return tr;
}

// Minimal '*' / '?' wildcard match for --sessions patterns.
bool wildcard_match(const std::string& pat, const std::string& s, size_t pi = 0, size_t si = 0) {
    while (pi < pat.size()) {
        if (pat[pi] == '*') {
            for (size_t k = si; k <= s.size(); ++k)
                if (wildcard_match(pat, s, pi + 1, k)) return true;
            return false;
        }
        if (si >= s.size()) return false;
        if (pat[pi] != '?' && pat[pi] != s[si]) return false;
        ++pi;
        ++si;
    }
    return si == s.size();
}

std::vector<std::string> expand_session_patterns(const std::vector<std::string>& patterns) {
    std::vector<std::string> out;
    for (const std::string& pat : patterns) {
        if (pat.find_first_of("*?") == std::string::npos) {
            out.push_back(pat);
            continue;
        }
        const fs::path p(pat);
        const fs::path parent = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        const std::string leaf = p.filename().string();
        std::vector<std::string> matched;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(parent, ec))
            if (wildcard_match(leaf, entry.path().filename().string()))
                matched.push_back(entry.path().string());
        std::sort(matched.begin(), matched.end());
        out.insert(out.end(), matched.begin(), matched.end());
    }
    return out;
}

struct LatencySource {
    std::string file;       // --latency
    bool auto_estimate = false;  // --auto-latency
};

LatencyEstimate resolve_latency(const LatencySource& src, const RawSession& session, bool quiet) {
    if (!src.file.empty()) return read_latency_file(src.file);
    if (src.auto_estimate) {
        if (session.marker.empty()) throw Error("MissingStream", "MARKER (needed for --auto-latency)");
        if (session.poses.empty()) throw Error("MissingStream", "POSE");
        const Trajectory1D f = marker_component(session.marker, Axis::X);
        const Trajectory1D g = extract_axis(session.poses, Axis::X);
        const LatencyEstimate est = estimate_latency(f, g, LatencyConfig{});
        info(quiet, "auto latency: delta_s " + fmt_g17(est.delta_star));
        return est;
    }
    info(quiet, "no latency supplied; assuming 0 s");
    return LatencyEstimate{};
}

int run_simulate(const std::string& scenario_path, const std::string& out_dir,
                 const std::string& truth_path, uint64_t seed, bool seed_set,
                 const std::string& session_id, bool quiet) {
    SimScenario sc = scenario_path.empty() ? SimScenario{} : SimScenario::load(scenario_path);
    if (seed_set) sc.seed = seed;
    if (!session_id.empty()) sc.session_id = session_id;
    SimResult result = generate_session(sc);
    write_session(out_dir, result.session);
    if (!truth_path.empty()) write_file_bytes(truth_path, result.truth.scenario().serialize());
    info(quiet, "session " + out_dir + ": poses " + std::to_string(result.session.poses.size()) +
                    ", video " + std::to_string(result.session.video.size()) + ", encoder " +
                    std::to_string(result.session.encoder.size()) + ", tactile " +
                    std::to_string(result.session.tactile.size()) + ", marker " +
                    std::to_string(result.session.marker.size()));
    return 0;
}

int run_hub(const std::string& session_dir, int port, const std::string& session_id, bool quiet) {
    if (session_dir.empty())
        throw Error("InvalidConfig", "no session directory (use --session or DEMOSYNC_SESSION_DIR)");
    CaptureHub::Options opts;
    opts.listen_port = port;
    opts.session_dir = session_dir;
    opts.session_id = session_id;
    opts.quiet = quiet;
    CaptureHub hub(opts);
    hub.start();
    std::printf("listening %d\n", hub.port());
    std::fflush(stdout);
    // Record until stdin closes.
    std::string line;
    while (std::getline(std::cin, line)) {
    }
    hub.stop();
    std::printf("records %ld drops %ld protocol_errors %ld\n", hub.records_logged(),
                hub.out_of_order_drops(), hub.protocol_errors());
    return 0;
}

int run_calibrate_latency(const std::string& session_dir, const std::string& axis_name,
                          double delta_min, double delta_max, double epsilon, bool allow_flip,
                          const std::string& plot_path, const std::string& out_path, bool quiet) {
    if (session_dir.empty())
        throw Error("InvalidConfig", "no session directory (use --session or DEMOSYNC_SESSION_DIR)");
    const Axis axis = axis_from_string(axis_name);
    const LoadedSession ls = load_session(session_dir);
    for (const std::string& w : ls.warnings) info(quiet, "warning: " + w);
    if (ls.session.marker.empty()) throw Error("MissingStream", "MARKER");
    if (ls.session.poses.empty()) throw Error("MissingStream", "POSE");

    const Trajectory1D f = marker_component(ls.session.marker, axis);
    const Trajectory1D g = extract_axis(ls.session.poses, axis);
    LatencyConfig cfg;
    cfg.delta_min = delta_min;
    cfg.delta_max = delta_max;
    cfg.epsilon = epsilon;
    cfg.validate();

    LatencyEstimate est;
    bool flipped = false;
    if (allow_flip) {
        const FlipAwareEstimate fa = estimate_latency_allow_flip(f, g, cfg);
        est = fa.estimate;
        flipped = fa.flipped;
    } else {
        est = estimate_latency(f, g, cfg);
    }
    if (!out_path.empty()) write_latency_file(out_path, est, flipped, axis_name);
    if (!plot_path.empty()) emit_alignment_plot(f, g, -est.delta_star, plot_path);
    std::printf("delta_s %s residual_mse %s overlap %s passes %d flipped %d\n",
                fmt_g17(est.delta_star).c_str(), fmt_g17(est.residual_mse).c_str(),
                fmt_g17(est.overlap_fraction).c_str(), est.passes, flipped ? 1 : 0);
    return 0;
}

int run_calibrate_gripper(const std::string& readings_path, const std::string& out_path,
                          bool quiet) {
    const KvFile kv = KvFile::load(readings_path);
    std::vector<std::pair<EncoderReading, double>> samples;
    for (const auto& [key, value] : kv.entries) {
        const long raw = parse_long(key, "encoder reading");
        if (raw < 0 || raw >= kEncoderCountsPerRev)
            throw Error("InvalidReading", "encoder count out of [0, 4096): " + key);
        samples.push_back({EncoderReading{static_cast<uint16_t>(raw)},
                           parse_double(value, "jaw width")});
    }
    const GripperCalibration cal = build_gripper_map(samples);
    cal.save(out_path);
    info(quiet, "gripper map: " + std::to_string(cal.knots().size()) + " knots, widths [" +
                    fmt_g17(cal.min_width()) + ", " + fmt_g17(cal.max_width()) + "] m");
    std::printf("digest %s\n", fmt_hex32(cal.content_digest()).c_str());
    return 0;
}

int run_calibrate_controller(const std::string& recorded_path, const std::string& out_path,
                             bool quiet) {
    const KvFile kv = KvFile::load(recorded_path);
    std::vector<double> vals;
    for (const auto& [key, value] : kv.entries) {
        vals.push_back(parse_double(key, "recorded pose"));
        std::string cur;
        for (char c : value + " ") {
            if (c == ' ' || c == '\t') {
                if (!cur.empty()) vals.push_back(parse_double(cur, "recorded pose"));
                cur.clear();
            } else {
                cur += c;
            }
        }
    }
    if (vals.size() != 7)
        throw Error("ParseError",
                    recorded_path + ": expected 7 values (qw qx qy qz tx ty tz), got " +
                        std::to_string(vals.size()));
    RigidTransform recorded;
    recorded.rotation = Quat{vals[0], vals[1], vals[2], vals[3]}.normalized();
    recorded.translation = {vals[4], vals[5], vals[6]};
    const ControllerCalibration cal = make_controller_calibration(recorded);
    cal.save(out_path);
    info(quiet, "controller correction saved to " + out_path);
    std::printf("digest %s\n", fmt_hex32(cal.content_digest()).c_str());
    return 0;
}

PipelineConfig assemble_config(const std::string& gripper_path, const std::string& controller_path,
                               double tau, double hold_tolerance) {
    PipelineConfig cfg;
    if (!gripper_path.empty()) cfg.gripper_cal = GripperCalibration::load(gripper_path);
    if (!controller_path.empty())
        cfg.controller_cal = ControllerCalibration::load(controller_path);
    cfg.tactile_tau = tau;
    cfg.tactile_hold_tolerance = hold_tolerance;
    return cfg;
}

int run_process(const std::string& session_dir, const std::string& gripper_path,
                const std::string& controller_path, const LatencySource& latency_src, double tau,
                double hold_tolerance, bool strict, const std::string& out_dir, bool quiet) {
    if (session_dir.empty())
        throw Error("InvalidConfig", "no session directory (use --session or DEMOSYNC_SESSION_DIR)");
    const LoadedSession ls =
        load_session(session_dir, strict ? LoadPolicy::Strict : LoadPolicy::TolerateTail);
    for (const std::string& w : ls.warnings) info(quiet, "warning: " + w);
    for (const LogIssue& issue : ls.issues)
        info(quiet, "warning: " + issue.log_name + " truncated at byte " +
                        std::to_string(issue.byte_offset) + " (" + issue.message + ")");

    PipelineConfig cfg = assemble_config(gripper_path, controller_path, tau, hold_tolerance);
    cfg.latency = resolve_latency(latency_src, ls.session, quiet);

    BuildReport report;
    const Episode ep = build_episode(ls.session, cfg, &report);
    for (const std::string& w : report.warnings) info(quiet, "warning: " + w);
    write_episode(ep, out_dir);
    std::printf("episode %s frames %zu dropped %zu\n", out_dir.c_str(), ep.frame_count(),
                report.frames_dropped);
    return 0;
}

int run_inspect(const std::string& episode_dir) {
    const std::string manifest =
        read_file_bytes((fs::path(episode_dir) / "manifest.txt").string());
    std::fwrite(manifest.data(), 1, manifest.size(), stdout);

    const Episode ep = read_episode(episode_dir);
    double width_cov = 0.0, left_cov = 0.0, right_cov = 0.0;
    for (size_t i = 0; i < ep.frame_count(); ++i) {
        width_cov += ep.width_present[i];
        left_cov += ep.tactile_left.present.empty() ? 0 : ep.tactile_left.present[i];
        right_cov += ep.tactile_right.present.empty() ? 0 : ep.tactile_right.present[i];
    }
    const double n = ep.frame_count() ? static_cast<double>(ep.frame_count()) : 1.0;
    std::printf("\n");
    std::printf("frames %zu\n", ep.frame_count());
    if (ep.frame_count())
        std::printf("span %s %s\n", fmt_g17(ep.frame_times.front()).c_str(),
                    fmt_g17(ep.frame_times.back()).c_str());
    std::printf("width_coverage %s\n", fmt_g17(width_cov / n).c_str());
    std::printf("tactile_left_coverage %s\n", fmt_g17(left_cov / n).c_str());
    std::printf("tactile_right_coverage %s\n", fmt_g17(right_cov / n).c_str());
    return 0;
}

int run_report(const std::vector<std::string>& patterns, const std::string& gripper_path,
               const std::string& controller_path, const std::string& latency_path, double tau,
               double hold_tolerance, const std::string& out_path, bool quiet) {
    const std::vector<std::string> dirs = expand_session_patterns(patterns);
    if (dirs.empty()) throw Error("IoError", "no sessions matched");

    PipelineConfig cfg = assemble_config(gripper_path, controller_path, tau, hold_tolerance);
    if (!latency_path.empty()) cfg.latency = read_latency_file(latency_path);

    std::vector<RawSession> sessions;
    std::vector<SessionUsability> load_failures;
    for (const std::string& dir : dirs) {
        try {
            LoadedSession ls = load_session(dir);
            for (const std::string& w : ls.warnings) info(quiet, dir + ": " + w);
            sessions.push_back(std::move(ls.session));
        } catch (const Error& e) {
            SessionUsability row;
            row.session_id = dir;
            row.usable = false;
            row.reason = e.what();
            load_failures.push_back(std::move(row));
        }
    }

    UsabilityStats stats;
    if (!sessions.empty()) stats = usability_report(sessions, {cfg});
    stats.sessions.insert(stats.sessions.end(), load_failures.begin(), load_failures.end());
    size_t usable = 0;
    for (const SessionUsability& row : stats.sessions)
        if (row.usable) ++usable;
    stats.usable_fraction =
        stats.sessions.empty() ? 0.0 : static_cast<double>(usable) / stats.sessions.size();

    emit(out_path, usability_csv(stats));
    return 0;
}

int run_eval(const std::string& episode_dir, const std::string& truth_path,
             const std::string& out_path, const std::string& plot_path) {
    const Episode ep = read_episode(episode_dir);
    const GroundTruth truth(SimScenario::load(truth_path));
    const ErrorStats stats = score_against_truth(ep, truth);
    emit(out_path, error_stats_csv(stats));

    if (!plot_path.empty()) {
        std::vector<PlotSeries> series(3);
        const char* labels[3] = {"|dx| (mm)", "|dy| (mm)", "|dz| (mm)"};
        for (int a = 0; a < 3; ++a) series[a].label = labels[a];
        for (size_t i = 0; i < ep.frame_count(); ++i) {
            const Pose want = truth.tool_pose(ep.frame_times[i]);
            const Vec3 d = ep.poses[i].position - want.position;
            const double axes[3] = {d.x, d.y, d.z};
            for (int a = 0; a < 3; ++a) {
                series[a].x.push_back(ep.frame_times[i]);
                series[a].y.push_back(std::fabs(axes[a]) * 1000.0);
            }
        }
        write_file_bytes(plot_path, render_line_svg(series, "per-axis position error", "time (s)",
                                                    "error (mm)"));
    }
    return 0;
}

}  // namespace

int cli_dispatch(int argc, char** argv) {
    CLI::App app{"multi-rate sensor capture, calibration and episode packing toolkit"};
    app.set_config("--config");
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress informational output");
    uint64_t seed = 0;
    CLI::Option* seed_opt = app.add_option("--seed", seed, "override the scenario seed");

    auto* sim = app.add_subcommand("simulate", "generate a synthetic capture session");
    sim->fallthrough();
    std::string sim_scenario, sim_out, sim_truth, sim_id;
    sim->add_option("--scenario", sim_scenario, "scenario file (defaults when omitted)");
    sim->add_option("--out,-o", sim_out, "session directory to write")->required();
    sim->add_option("--truth", sim_truth, "write the resolved scenario here");
    sim->add_option("--id", sim_id, "override the session id");

    auto* hub = app.add_subcommand("hub", "record live wire-protocol connections into a session");
    hub->fallthrough();
    std::string hub_session, hub_id;
    int hub_port = 0;
    hub->add_option("--session", hub_session, "session directory")
        ->envname("DEMOSYNC_SESSION_DIR");
    hub->add_option("--listen", hub_port, "TCP port (0 picks one and prints it)");
    hub->add_option("--id", hub_id, "session id for the header");

    auto* cal_lat = app.add_subcommand("calibrate-latency", "estimate stream latency from a sweep");
    cal_lat->fallthrough();
    std::string cl_session, cl_axis = "x", cl_plot, cl_out;
    double cl_min = -0.5, cl_max = 0.5, cl_eps = 1e-4;
    bool cl_flip = false;
    cal_lat->add_option("--session", cl_session, "session directory")
        ->envname("DEMOSYNC_SESSION_DIR");
    cal_lat->add_option("--axis", cl_axis, "pose axis to align (x, y or z)");
    cal_lat->add_option("--min", cl_min, "lower latency bound (s)");
    cal_lat->add_option("--max", cl_max, "upper latency bound (s)");
    cal_lat->add_option("--epsilon", cl_eps, "termination width (s)");
    cal_lat->add_flag("--allow-flip", cl_flip, "also try the sign-flipped stream");
    cal_lat->add_option("--plot", cl_plot, "write a before/after alignment SVG");
    cal_lat->add_option("--out,-o", cl_out, "write the latency file here");

    auto* cal_grip = app.add_subcommand("calibrate-gripper", "build the encoder-to-width map");
    cal_grip->fallthrough();
    std::string cg_readings, cg_out;
    cal_grip->add_option("--readings", cg_readings, "file of 'raw_count width_m' rows")
        ->required();
    cal_grip->add_option("--out,-o", cg_out, "calibration file to write")->required();

    auto* cal_ctrl =
        app.add_subcommand("calibrate-controller", "derive the mount correction from a base pose");
    cal_ctrl->fallthrough();
    std::string cc_recorded, cc_out;
    cal_ctrl->add_option("--recorded", cc_recorded, "file with the recorded base pose (7 values)")
        ->required();
    cal_ctrl->add_option("--out,-o", cc_out, "calibration file to write")->required();

    auto* process = app.add_subcommand("process", "build an episode from a session");
    process->fallthrough();
    std::string pr_session, pr_gripper, pr_controller, pr_out;
    LatencySource pr_latency;
    double pr_tau = kDefaultTactileTau, pr_hold = 0.1;
    bool pr_strict = false;
    process->add_option("--session", pr_session, "session directory")
        ->envname("DEMOSYNC_SESSION_DIR");
    process->add_option("--gripper-cal", pr_gripper, "gripper calibration file");
    process->add_option("--controller-cal", pr_controller, "controller calibration file");
    CLI::Option* pr_lat_opt =
        process->add_option("--latency", pr_latency.file, "latency file from calibrate-latency");
    process->add_flag("--auto-latency", pr_latency.auto_estimate,
                      "estimate latency from this session")
        ->excludes(pr_lat_opt);
    process->add_option("--tau", pr_tau, "tactile contact threshold");
    process->add_option("--hold-tolerance", pr_hold, "tactile hold-last tolerance (s)");
    process->add_flag("--strict", pr_strict, "fail on damaged logs instead of truncating");
    process->add_option("--out,-o", pr_out, "episode directory to write")->required();

    auto* inspect = app.add_subcommand("inspect", "print an episode's manifest and summary");
    inspect->fallthrough();
    std::string in_dir;
    inspect->add_option("episode", in_dir, "episode directory")->required();

    auto* report = app.add_subcommand("report", "usability report over a batch of sessions");
    report->fallthrough();
    std::vector<std::string> rp_patterns;
    std::string rp_gripper, rp_controller, rp_latency, rp_out;
    double rp_tau = kDefaultTactileTau, rp_hold = 0.1;
    report->add_option("--sessions", rp_patterns, "session directories (wildcards allowed)")
        ->required();
    report->add_option("--gripper-cal", rp_gripper, "gripper calibration file");
    report->add_option("--controller-cal", rp_controller, "controller calibration file");
    report->add_option("--latency", rp_latency, "latency file");
    report->add_option("--tau", rp_tau, "tactile contact threshold");
    report->add_option("--hold-tolerance", rp_hold, "tactile hold-last tolerance (s)");
    report->add_option("--out,-o", rp_out, "write the CSV here (default stdout)");

    auto* eval = app.add_subcommand("eval", "score an episode against simulator truth");
    eval->fallthrough();
    std::string ev_episode, ev_truth, ev_out, ev_plot;
    eval->add_option("--episode", ev_episode, "episode directory")->required();
    eval->add_option("--truth", ev_truth, "resolved scenario file from simulate")->required();
    eval->add_option("--out,-o", ev_out, "write the CSV here (default stdout)");
    eval->add_option("--plot", ev_plot, "write a per-axis error SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    try {
        if (sim->parsed())
            return run_simulate(sim_scenario, sim_out, sim_truth, seed, seed_opt->count() > 0,
                                sim_id, quiet);
        if (hub->parsed()) return run_hub(hub_session, hub_port, hub_id, quiet);
        if (cal_lat->parsed())
            return run_calibrate_latency(cl_session, cl_axis, cl_min, cl_max, cl_eps, cl_flip,
                                         cl_plot, cl_out, quiet);
        if (cal_grip->parsed()) return run_calibrate_gripper(cg_readings, cg_out, quiet);
        if (cal_ctrl->parsed()) return run_calibrate_controller(cc_recorded, cc_out, quiet);
        if (process->parsed())
            return run_process(pr_session, pr_gripper, pr_controller, pr_latency, pr_tau, pr_hold,
                               pr_strict, pr_out, quiet);
        if (inspect->parsed()) return run_inspect(in_dir);
        if (report->parsed())
            return run_report(rp_patterns, rp_gripper, rp_controller, rp_latency, rp_tau, rp_hold,
                              rp_out, quiet);
        if (eval->parsed()) return run_eval(ev_episode, ev_truth, ev_out, ev_plot);
        std::cerr << app.help();
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "ERROR %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ERROR Internal %s\n", e.what());
        return 1;
    }
}

}  // namespace demosync
