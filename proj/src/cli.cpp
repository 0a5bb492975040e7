#include "tvx/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tvx/core_profile.hpp"
#include "tvx/errors.hpp"
#include "tvx/green.hpp"
#include "tvx/pde.hpp"
#include "tvx/torus.hpp"

namespace tvx {

using nlohmann::json;

const char* command_name(command_kind c) {
    switch (c) {
        case command_kind::reduce: return "reduce";
        case command_kind::sweep: return "sweep";
        case command_kind::pde_compare: return "pde-compare";
        case command_kind::gamma: return "gamma";
        case command_kind::verify_harmonic: return "verify-harmonic";
    }
    return "?";
}

command_kind command_from_name(const std::string& name) {
    for (command_kind c : {command_kind::reduce, command_kind::sweep, command_kind::pde_compare,
                           command_kind::gamma, command_kind::verify_harmonic})
        if (name == command_name(c)) return c;
    fail(errc::config, "unknown command '" + name +
                           "' (expected reduce, sweep, pde-compare, gamma or verify-harmonic)");
}

vec2 run_config::resolved_q0() const {
    if (!q0_default) return q0;
    vec2 q{0, 0};
    for (std::size_t j = 0; j < cfg.positions.size(); ++j) {
        q.x += 2 * M_PI * cfg.degrees[j] * cfg.positions[j].x;
        q.y += 2 * M_PI * cfg.degrees[j] * cfg.positions[j].y;
    }
    return q;
}

// ---------------------------------------------------------------- config ---

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

double parse_double(const std::string& value, const std::string& key) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        fail(errc::config, "config key '" + key + "': not a number: '" + value + "'");
    return v;
}

int parse_int(const std::string& value, const std::string& key) {
    const double v = parse_double(value, key);
    const int i = static_cast<int>(std::lround(v));
    if (v != static_cast<double>(i))
        fail(errc::config, "config key '" + key + "': not an integer: '" + value + "'");
    return i;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<double> parse_doubles(const std::string& value, const std::string& key) {
    std::vector<double> out;
    for (const std::string& tok : split_ws(value)) out.push_back(parse_double(tok, key));
    if (out.empty()) fail(errc::config, "config key '" + key + "': empty value");
    return out;
}

}  // namespace

run_config parse_config_text(const std::string& text) {
    run_config rc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                fail(errc::config, "config line " + std::to_string(lineno) + ": unterminated section header");
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (section != "run" && section != "vortices" && section != "params" &&
                section != "sweep" && section != "gamma")
                fail(errc::config, "config line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(errc::config, "config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qual = section + "." + key;

        if (qual == "run.command") {
            rc.command = command_from_name(value);
        } else if (qual == "run.out") {
            rc.out_dir = value;
        } else if (qual == "vortices.positions") {
            rc.cfg.positions.clear();
            std::stringstream parts(value);
            std::string part;
            while (std::getline(parts, part, ';')) {
                const std::vector<double> xy = parse_doubles(part, qual);
                if (xy.size() != 2)
                    fail(errc::config, "config key '" + qual + "': each position needs exactly x y");
                rc.cfg.positions.push_back({xy[0], xy[1]});
            }
        } else if (qual == "vortices.degrees") {
            rc.cfg.degrees.clear();
            for (const std::string& tok : split_ws(value))
                rc.cfg.degrees.push_back(parse_int(tok, qual));
        } else if (qual == "vortices.q0") {
            if (lower(value) == "dipole-default") {
                rc.q0_default = true;
            } else {
                const std::vector<double> q = parse_doubles(value, qual);
                if (q.size() != 2)
                    fail(errc::config, "config key '" + qual + "': expected 'dipole-default' or two reals");
                rc.q0 = {q[0], q[1]};
                rc.q0_default = false;
            }
        } else if (qual == "params.mu") {
            rc.params.mu = parse_double(value, qual);
        } else if (qual == "params.eps") {
            rc.params.eps = parse_double(value, qual);
        } else if (qual == "params.dt") {
            rc.params.dt = parse_double(value, qual);
        } else if (qual == "params.t_final") {
            rc.params.t_final = parse_double(value, qual);
        } else if (qual == "params.collision_radius") {
            rc.params.collision_radius = parse_double(value, qual);
        } else if (qual == "params.stride") {
            rc.params.output_stride = parse_int(value, qual);
        } else if (qual == "params.grid") {
            rc.grid_n = parse_int(value, qual);
        } else if (qual == "sweep.mu_values") {
            rc.sweep_mu = parse_doubles(value, qual);
        } else if (qual == "gamma.eps_values") {
            rc.gamma_eps = parse_doubles(value, qual);
        } else {
            fail(errc::config, "config line " + std::to_string(lineno) + ": unknown key '" + qual + "'");
        }
    }
    return rc;
}

run_config parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io, "config file not readable: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// ------------------------------------------------------- record and digest --

std::string config_record(const run_config& rc) {
    json j;
    j["command"] = command_name(rc.command);
    json pos = json::array();
    for (const vec2& a : rc.cfg.positions) pos.push_back({a.x, a.y});
    j["positions"] = pos;
    j["degrees"] = rc.cfg.degrees;
    j["q0_mode"] = rc.q0_default ? "dipole-default" : "explicit";
    const vec2 q = rc.resolved_q0();
    j["q0"] = {q.x, q.y};
    j["mu"] = rc.params.mu;
    j["eps"] = rc.params.eps;
    j["dt"] = rc.params.dt;
    j["t_final"] = rc.params.t_final;
    j["collision_radius"] = rc.params.collision_radius;
    j["stride"] = rc.params.output_stride;
    j["grid"] = rc.grid_n;
    j["sweep_mu"] = rc.sweep_mu;
    j["gamma_eps"] = rc.gamma_eps;
    // the output directory is where the record lands, not part of the run:
    // artifacts stay byte-identical no matter where they are written
    return j.dump();
}

std::string config_digest(const run_config& rc) {
    // FNV-1a, 64 bit: depends on nothing but the serialized inputs
    const std::string rec = config_record(rc);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : rec) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ------------------------------------------------------------ CSV writers --

namespace {

std::string num17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string commented(const std::string& preamble) {
    if (preamble.empty()) return {};
    std::string out;
    std::istringstream in(preamble);
    std::string line;
    while (std::getline(in, line)) out += "# " + line + "\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io, "cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(errc::io, "write failed: " + path);
}

}  // namespace

void write_trajectory(const trajectory& traj, const std::string& path,
                      const std::string& preamble) {
    const std::size_t nv = traj.degrees.size();
    const std::size_t ns = traj.samples.size();
    if (traj.energy.size() != ns || traj.invariant.size() != ns || traj.separation.size() != ns)
        fail(errc::parameter, "write_trajectory: per-sample arrays differ in length");

    std::string out = commented(preamble);
    out += "t";
    for (std::size_t j = 1; j <= nv; ++j) {
        const std::string sj = std::to_string(j);
        out += ",x" + sj + ",y" + sj + ",lx" + sj + ",ly" + sj + ",vx" + sj + ",vy" + sj;
    }
    out += ",qx,qy,W,invariant,min_sep\n";

    for (std::size_t k = 0; k < ns; ++k) {
        const reduced_state& s = traj.samples[k];
        if (s.lifted.size() != nv || s.velocities.size() != nv)
            fail(errc::parameter, "write_trajectory: sample size does not match degree count");
        out += num17(s.t);
        for (std::size_t j = 0; j < nv; ++j) {
            const vec2 w = wrap_unit(s.lifted[j]);
            out += "," + num17(w.x) + "," + num17(w.y);
            out += "," + num17(s.lifted[j].x) + "," + num17(s.lifted[j].y);
            out += "," + num17(s.velocities[j].x) + "," + num17(s.velocities[j].y);
        }
        const vec2 q = update_lift(s, traj.degrees);
        out += "," + num17(q.x) + "," + num17(q.y);
        out += "," + num17(traj.energy[k]) + "," + num17(traj.invariant[k]) + "," +
               num17(traj.separation[k]) + "\n";
    }
    write_text_file(path, out);
}

csv_table read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io, "cannot open for reading: " + path);
    csv_table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            table.columns = cells;
            have_header = true;
            continue;
        }
        std::vector<double> vals;
        vals.reserve(cells.size());
        for (const std::string& c : cells) vals.push_back(parse_double(c, "csv cell"));
        table.rows.push_back(std::move(vals));
    }
    return table;
}

// -------------------------------------------------------------- SVG plots --

namespace {

const char* const kPalette[6] = {"#1f6fb4", "#d95f02", "#1b9e77",
                                 "#7570b3", "#e7298a", "#66a61e"};

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// split a point sequence wherever a coordinate jumps across a period seam
std::vector<std::vector<vec2>> seam_segments(const std::vector<vec2>& pts) {
    std::vector<std::vector<vec2>> segs;
    for (const vec2& p : pts) {
        if (segs.empty() || std::abs(p.x - segs.back().back().x) > 0.5 ||
            std::abs(p.y - segs.back().back().y) > 0.5)
            segs.emplace_back();
        segs.back().push_back(p);
    }
    return segs;
}

bool segment_moves(const std::vector<vec2>& seg) {
    for (const vec2& p : seg)
        if (p.x != seg.front().x || p.y != seg.front().y) return true;
    return false;
}

void emit_polyline(std::string& svg, const std::vector<std::pair<double, double>>& pts,
                   const char* color, const char* dash) {
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.2\"";
    if (dash) {
        svg += " stroke-dasharray=\"";
        svg += dash;
        svg += "\"";
    }
    svg += " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) svg += " ";
        svg += px(pts[i].first) + "," + px(pts[i].second);
    }
    svg += "\"/>\n";
}

void emit_line(std::string& svg, double x1, double y1, double x2, double y2, const char* color,
               double width) {
    svg += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" +
           px(y2) + "\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"" + px(width) + "\"/>\n";
}

void emit_text(std::string& svg, double x, double y, const std::string& text, const char* color,
               int size, const char* anchor) {
    svg += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" fill=\"";
    svg += color;
    svg += "\" text-anchor=\"";
    svg += anchor;
    svg += "\">" + text + "</text>\n";
}

void emit_glyph(std::string& svg, double cx, double cy, int degree, const char* color) {
    const double g = 6.0, d = 4.2426;
    if (degree > 0) {
        emit_line(svg, cx - g, cy, cx + g, cy, color, 1.7);
        emit_line(svg, cx, cy - g, cx, cy + g, color, 1.7);
    } else {
        emit_line(svg, cx - d, cy - d, cx + d, cy + d, color, 1.7);
        emit_line(svg, cx - d, cy + d, cx + d, cy - d, color, 1.7);
    }
}

}  // namespace

void write_plot(const std::vector<trajectory>& trajs, const std::string& path,
                const std::vector<std::string>& labels, const std::string& preamble) {
    if (trajs.empty()) fail(errc::parameter, "write_plot: need at least one trajectory");

    const double margin = 46, side = 260, gap = 56, wide = 300;
    const double row_h = side + 64;
    const double width = margin + side + gap + wide + margin;
    const double height = 16 + row_h * static_cast<double>(trajs.size());

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) + "\" height=\"" +
           px(height) + "\" viewBox=\"0 0 " + px(width) + " " + px(height) + "\">\n";
    if (!preamble.empty()) {
        svg += "<!--\n";
        std::istringstream in(preamble);
        std::string line;
        while (std::getline(in, line)) svg += line + "\n";
        svg += "-->\n";
    }
    svg += "<rect x=\"0\" y=\"0\" width=\"" + px(width) + "\" height=\"" + px(height) +
           "\" fill=\"#ffffff\"/>\n";

    for (std::size_t k = 0; k < trajs.size(); ++k) {
        const trajectory& tr = trajs[k];
        const double top = 16 + row_h * static_cast<double>(k) + 34;
        const std::string label = k < labels.size() ? labels[k] : "run " + std::to_string(k + 1);
        emit_text(svg, margin, top - 12, label, "#222222", 14, "start");

        // left panel: the unit square
        const auto sx = [&](double x) { return margin + x * side; };
        const auto sy = [&](double y) { return top + (1.0 - y) * side; };
        svg += "<rect x=\"" + px(margin) + "\" y=\"" + px(top) + "\" width=\"" + px(side) +
               "\" height=\"" + px(side) + "\" fill=\"none\" stroke=\"#444444\"/>\n";
        emit_text(svg, sx(0), sy(0) + 14, "0", "#444444", 10, "middle");
        emit_text(svg, sx(1), sy(0) + 14, "1", "#444444", 10, "middle");
        emit_text(svg, sx(0) - 8, sy(1) + 4, "1", "#444444", 10, "end");

        const std::size_t nv = tr.degrees.size();
        bool moved = false;
        for (std::size_t j = 0; j < nv; ++j) {
            std::vector<vec2> wrapped;
            wrapped.reserve(tr.samples.size());
            for (const reduced_state& s : tr.samples) wrapped.push_back(wrap_unit(s.lifted[j]));
            for (const std::vector<vec2>& seg : seam_segments(wrapped)) {
                if (seg.size() < 2 || !segment_moves(seg)) continue;
                moved = true;
                std::vector<std::pair<double, double>> pts;
                pts.reserve(seg.size());
                for (const vec2& p : seg) pts.emplace_back(sx(p.x), sy(p.y));
                emit_polyline(svg, pts, kPalette[j % 6], nullptr);
            }
            if (!wrapped.empty())
                emit_glyph(svg, sx(wrapped.front().x), sy(wrapped.front().y), tr.degrees[j],
                           kPalette[j % 6]);
        }

        // right panel: first-vortex coordinates against time
        const double rx = margin + side + gap;
        svg += "<rect x=\"" + px(rx) + "\" y=\"" + px(top) + "\" width=\"" + px(wide) +
               "\" height=\"" + px(side) + "\" fill=\"none\" stroke=\"#444444\"/>\n";
        const double t_last = tr.samples.empty() ? 0.0 : tr.samples.back().t;
        const double t_span = t_last > 0.0 ? t_last : 1.0;
        emit_text(svg, rx, top + side + 14, "0", "#444444", 10, "middle");
        emit_text(svg, rx + wide, top + side + 14, "t = " + fmt_short(t_last), "#444444", 10,
                  "end");
        if (moved && nv >= 1) {
            for (int coord = 0; coord < 2; ++coord) {
                std::vector<double> vals;
                vals.reserve(tr.samples.size());
                for (const reduced_state& s : tr.samples) {
                    const vec2 w = wrap_unit(s.lifted[0]);
                    vals.push_back(coord == 0 ? w.x : w.y);
                }
                std::vector<std::pair<double, double>> pts;
                for (std::size_t i = 0; i < vals.size(); ++i) {
                    if (i && std::abs(vals[i] - vals[i - 1]) > 0.5) {
                        if (pts.size() >= 2) emit_polyline(svg, pts, kPalette[coord], nullptr);
                        pts.clear();
                    }
                    pts.emplace_back(rx + tr.samples[i].t / t_span * wide,
                                     top + (1.0 - vals[i]) * side);
                }
                if (pts.size() >= 2) emit_polyline(svg, pts, kPalette[coord], nullptr);
            }
            emit_text(svg, rx + 8, top + 16, "x1", kPalette[0], 11, "start");
            emit_text(svg, rx + 30, top + 16, "y1", kPalette[1], 11, "start");
        }
    }
    svg += "</svg>\n";
    write_text_file(path, svg);
}

void write_field_binary(const grid_field& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(f.values[0])));
    if (!out) fail(errc::io, "write failed: " + path);
}

// ------------------------------------------------------------- pipelines ---

namespace {

const green_evaluator& shared_green() {
    static green_evaluator g{green_params{}};
    return g;
}

std::string mu_tag(double mu) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", mu);
    return buf;
}

void write_diagnostics(const trajectory& traj, const std::string& path,
                       const std::string& preamble) {
    std::string out = commented(preamble);
    out += "t,W,speed2,invariant,min_sep\n";
    for (std::size_t k = 0; k < traj.samples.size(); ++k)
        out += num17(traj.samples[k].t) + "," + num17(traj.energy[k]) + "," +
               num17(traj.speed2[k]) + "," + num17(traj.invariant[k]) + "," +
               num17(traj.separation[k]) + "\n";
    write_text_file(path, out);
}

json trajectory_summary(const trajectory& traj, const sim_params& p) {
    json j;
    j["termination"] = termination_name(traj.reason);
    j["samples"] = traj.samples.size();
    j["final_t"] = traj.samples.empty() ? 0.0 : traj.samples.back().t;
    j["invariant_drift"] = invariant_drift(traj, p);
    j["final_min_sep"] = traj.separation.empty() ? 0.0 : traj.separation.back();
    return j;
}

void write_metadata(const run_config& rc, const json& results, const std::string& path) {
    json meta;
    meta["command"] = command_name(rc.command);
    meta["config"] = json::parse(config_record(rc));
    meta["digest"] = config_digest(rc);
    meta["results"] = results;
    write_text_file(path, meta.dump(2) + "\n");
}

int run_reduce(const run_config& rc, const std::string& out, const std::string& pre) {
    const trajectory traj = integrate(shared_green(), rc.cfg, rc.resolved_q0(), rc.params);
    write_trajectory(traj, out + "/trajectory.csv", pre);
    write_diagnostics(traj, out + "/diagnostics.csv", pre);
    write_plot({traj}, out + "/trajectory.svg", {"mu = " + mu_tag(rc.params.mu)}, pre);
    write_metadata(rc, trajectory_summary(traj, rc.params), out + "/metadata.json");
    std::printf("reduce: %s at t = %s, invariant drift %s\n", termination_name(traj.reason),
                fmt_short(traj.samples.back().t).c_str(),
                fmt_short(invariant_drift(traj, rc.params)).c_str());
    return 0;
}

int run_sweep(const run_config& rc, const std::string& out, const std::string& pre) {
    const vec2 q0 = rc.resolved_q0();
    // the comparison horizon cannot exceed the run itself; short runs
    // compare over their whole length (it shrinks further to the common
    // reached horizon either way, reported as effective_t)
    const double compare_t = std::min(0.5, rc.params.t_final);
    const mu_sweep_report rep =
        mu_sweep(shared_green(), rc.cfg, q0, rc.sweep_mu, rc.params, compare_t);

    std::vector<trajectory> trajs;
    std::vector<std::string> labels;
    json runs = json::object();
    for (double mu : rc.sweep_mu) {
        sim_params p = rc.params;
        p.mu = mu;
        trajectory traj = integrate(shared_green(), rc.cfg, q0, p);
        const std::string tag = mu_tag(mu);
        write_trajectory(traj, out + "/trajectory_mu_" + tag + ".csv", pre);
        write_diagnostics(traj, out + "/diagnostics_mu_" + tag + ".csv", pre);
        runs[tag] = trajectory_summary(traj, p);
        labels.push_back("mu = " + tag);
        trajs.push_back(std::move(traj));
    }
    write_plot(trajs, out + "/sweep.svg", labels, pre);

    std::string csv = commented(pre);
    csv += "mu,deviation\n";
    for (const mu_sweep_entry& e : rep.entries)
        csv += num17(e.mu) + "," + num17(e.deviation) + "\n";
    write_text_file(out + "/sweep.csv", csv);

    json results;
    results["runs"] = runs;
    results["compare_t"] = rep.compare_t;
    results["effective_t"] = rep.effective_t;
    results["reference_mu"] = rep.reference_mu;
    json entries = json::array();
    for (const mu_sweep_entry& e : rep.entries) entries.push_back({{"mu", e.mu}, {"deviation", e.deviation}});
    results["deviations"] = entries;
    write_metadata(rc, results, out + "/metadata.json");

    for (const mu_sweep_entry& e : rep.entries)
        std::printf("sweep: mu = %-10s D(mu) = %s\n", mu_tag(e.mu).c_str(),
                    fmt_short(e.deviation).c_str());
    std::printf("sweep: common window [0, %s]\n", fmt_short(rep.effective_t).c_str());
    return 0;
}

int run_pde_compare_cmd(const run_config& rc, const std::string& out, const std::string& pre) {
    const trajectory traj = integrate(shared_green(), rc.cfg, rc.resolved_q0(), rc.params);
    write_trajectory(traj, out + "/trajectory.csv", pre);
    write_diagnostics(traj, out + "/diagnostics.csv", pre);
    write_plot({traj}, out + "/trajectory.svg", {"mu = " + mu_tag(rc.params.mu)}, pre);

    const pde_compare_report rep = run_pde_compare(shared_green(), rc.grid_n, rc.params, traj);

    std::string csv = commented(pre);
    csv += "t,deviation\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k)
        csv += num17(rep.times[k]) + "," + num17(rep.deviations[k]) + "\n";
    write_text_file(out + "/compare.csv", csv);

    json results;
    results["reduced"] = trajectory_summary(traj, rc.params);
    results["max_deviation"] = rep.max_deviation;
    results["hamiltonian_drift"] = rep.hamiltonian_drift;
    results["tracking_losses"] = rep.losses;
    results["window_end"] = compare_end_name(rep.reason);
    results["reduced_truncated"] = rep.reduced_truncated;
    results["compare_t"] = rep.compare_t;
    results["dt_bound"] = rep.dt_bound;
    results["dt_used"] = rep.dt_used;
    write_metadata(rc, results, out + "/metadata.json");

    std::printf("pde-compare: max deviation %s over [0, %s], losses %d, window end: %s\n",
                fmt_short(rep.max_deviation).c_str(), fmt_short(rep.compare_t).c_str(), rep.losses,
                compare_end_name(rep.reason));
    return 0;
}

int run_gamma(const run_config& rc, const std::string& out, const std::string& pre) {
    const core_constant cc = core_energy_gamma(rc.gamma_eps);

    std::string csv = commented(pre);
    csv += "eps,gamma_energy_min,gamma_ode_collocation,abs_diff\n";
    double worst_diff = 0.0;
    for (double eps : rc.gamma_eps) {
        core_profile_params pp;
        pp.eps = eps;
        const double ga = minimize_profile_energy(pp).gamma_estimate();
        const double gb = solve_profile_ode(pp).gamma_estimate();
        worst_diff = std::max(worst_diff, std::abs(ga - gb));
        csv += num17(eps) + "," + num17(ga) + "," + num17(gb) + "," + num17(std::abs(ga - gb)) + "\n";
    }
    write_text_file(out + "/gamma.csv", csv);

    const double bound = 13.0 * M_PI / 12.0;
    const bool bound_ok = cc.gamma <= bound + 1e-3;
    const bool methods_ok = worst_diff <= 1e-3;

    json results;
    results["gamma"] = cc.gamma;
    results["eps_schedule"] = cc.epsilon_schedule;
    results["upper_bound"] = bound;
    results["bound_satisfied"] = bound_ok;
    results["max_method_difference"] = worst_diff;
    results["methods_agree"] = methods_ok;
    write_metadata(rc, results, out + "/metadata.json");

    std::printf("gamma: %.12f (bound %.12f: %s), method agreement %s\n", cc.gamma, bound,
                bound_ok ? "ok" : "VIOLATED", fmt_short(worst_diff).c_str());
    return bound_ok && methods_ok ? 0 : 1;
}

int run_verify_harmonic(const run_config& rc, const std::string& out, const std::string& pre) {
    // the grid builder takes the current integral, J applied to the reduced lift
    const vec2 q_field = jrot(rc.resolved_q0());
    harmonic_build_info info;
    const grid_field f = build_harmonic_map(shared_green(), rc.grid_n, rc.cfg, q_field, &info);
    const canonical_report rep = verify_canonical(shared_green(), f, info.cfg_used, info.q_used,
                                                  rc.params.eps);
    write_field_binary(f, out + "/field.bin");

    std::string csv = commented(pre);
    csv += "max_unimodularity,max_div_residual,div_bound,momentum_residual,momentum_bound,windings_match,pass\n";
    csv += num17(rep.max_unimodularity) + "," + num17(rep.max_div_residual) + "," +
           num17(rep.div_bound) + "," + num17(rep.momentum_residual) + "," +
           num17(rep.momentum_bound) + "," + (rep.windings_match ? "1" : "0") + "," +
           (rep.pass ? "1" : "0") + "\n";
    write_text_file(out + "/verify.csv", csv);

    json results;
    results["max_unimodularity"] = rep.max_unimodularity;
    results["unimodularity_bound"] = rep.unimodularity_bound;
    results["max_div_residual"] = rep.max_div_residual;
    results["div_bound"] = rep.div_bound;
    results["momentum"] = {rep.momentum.x, rep.momentum.y};
    results["momentum_residual"] = rep.momentum_residual;
    results["momentum_bound"] = rep.momentum_bound;
    results["windings"] = rep.windings;
    results["windings_match"] = rep.windings_match;
    results["max_snap_perturbation"] = info.max_perturbation;
    results["pass"] = rep.pass;
    write_metadata(rc, results, out + "/metadata.json");

    std::printf("verify-harmonic: %s (unimodularity %s, div %s/%s, momentum %s/%s)\n",
                rep.pass ? "pass" : "FAIL", fmt_short(rep.max_unimodularity).c_str(),
                fmt_short(rep.max_div_residual).c_str(), fmt_short(rep.div_bound).c_str(),
                fmt_short(rep.momentum_residual).c_str(), fmt_short(rep.momentum_bound).c_str());
    return rep.pass ? 0 : 1;
}

void write_error_record(const std::string& out, const error& e) {
    json j;
    j["error"] = e.name();
    j["exit_code"] = e.exit_code();
    j["message"] = e.what();
    try {
        write_text_file(out + "/error.json", j.dump(2) + "\n");
    } catch (...) {
        // the record is best effort; the exit code already carries the class
    }
}

}  // namespace

int run_command(const run_config& rc) {
    const std::string out = rc.out_dir.empty() ? std::string(".") : rc.out_dir;
    std::error_code fs_err;
    std::filesystem::create_directories(out, fs_err);
    if (fs_err) {
        std::fprintf(stderr, "error: IOError: cannot create output directory %s: %s\n",
                     out.c_str(), fs_err.message().c_str());
        return static_cast<int>(errc::io);
    }

    try {
        // reject bad input before any computation runs
        if (rc.command != command_kind::gamma) {
            validate_config(rc.cfg);
            if (rc.command != command_kind::verify_harmonic)
                make_initial_state(rc.cfg, rc.resolved_q0());
        }

        const std::string pre = "cfg " + config_record(rc) + "\ndigest " + config_digest(rc);
        switch (rc.command) {
            case command_kind::reduce: return run_reduce(rc, out, pre);
            case command_kind::sweep: return run_sweep(rc, out, pre);
            case command_kind::pde_compare: return run_pde_compare_cmd(rc, out, pre);
            case command_kind::gamma: return run_gamma(rc, out, pre);
            case command_kind::verify_harmonic: return run_verify_harmonic(rc, out, pre);
        }
        fail(errc::config, "unhandled command");
    } catch (const error& e) {
        write_error_record(out, e);
        std::fprintf(stderr, "error: %s: %s\n", e.name(), e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        const error wrapped(errc::io, e.what());
        write_error_record(out, wrapped);
        std::fprintf(stderr, "error: IOError: %s\n", e.what());
        return wrapped.exit_code();
    }
}

}  // namespace tvx
