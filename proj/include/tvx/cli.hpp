#pragma once

#include <string>
#include <vector>

#include "tvx/harmonic.hpp"
#include "tvx/reduced.hpp"

namespace tvx {

// Batch driver: every invocation runs one named pipeline to completion and
// leaves its artifacts (CSV tables, an SVG figure, a metadata record) in the
// output directory.  All knobs live in a plain-text config file so a run is
// reproducible from its own metadata; command-line flags override file values.

enum class command_kind { reduce, sweep, pde_compare, gamma, verify_harmonic };

const char* command_name(command_kind c);

// ConfigError unless the name is one of
// reduce / sweep / pde-compare / gamma / verify-harmonic
command_kind command_from_name(const std::string& name);

struct run_config {
    command_kind command = command_kind::reduce;

    // vortex placement; defaults to the +/- dipole at (0.3,0.5), (0.7,0.5)
    vortex_config cfg{{{0.3, 0.5}, {0.7, 0.5}}, {1, -1}};

    // initial momentum lift of the reduced law.  When q0_default is set the
    // value is ignored and the lift is 2 pi sum_j d_j a_j with zero lattice
    // offset (the "dipole-default" config token).
    vec2 q0{0, 0};
    bool q0_default = true;

    sim_params params;
    int grid_n = 256;  // PDE / harmonic-map resolution

    // mu values visited by `sweep` (reference run is the mu = 0 entry)
    std::vector<double> sweep_mu{0.01, 0.0025, 0.000625, 0.0};

    // eps schedule for `gamma` (decreasing)
    std::vector<double> gamma_eps{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};

    std::string out_dir = "out";

    vec2 resolved_q0() const;  // q0 with the default token applied
};

// Config file format: '#' comments, [section] headers, key = value lines.
// Sections/keys: [run] command, out; [vortices] positions (pairs separated
// by ';'), degrees, q0 ("dipole-default" or two reals); [params] mu, eps,
// dt, t_final, collision_radius, stride, grid; [sweep] mu_values;
// [gamma] eps_values.  Unknown sections or keys are ConfigError: a typo must
// not silently fall back to a default.
run_config parse_config_text(const std::string& text);
run_config parse_config_file(const std::string& path);

// Canonical single-line JSON of every resolved parameter, and the FNV-1a
// digest of that line.  The digest depends only on the resolved inputs, so
// re-running the same config reproduces it no matter how the code evolves.
std::string config_record(const run_config& rc);
std::string config_digest(const run_config& rc);

// Trajectory table: one row per sample with columns
//     t, then per vortex j: x_j, y_j (wrapped), lx_j, ly_j (lifted),
//     vx_j, vy_j, then qx, qy, W, invariant, min_sep
// printed with 17 significant digits so reading the file back reproduces
// every double bitwise.  An empty trajectory yields a header-only file.
// Lines of `preamble` are embedded as leading '#' comments.
void write_trajectory(const trajectory& traj, const std::string& path,
                      const std::string& preamble = "");

// generic reader for the CSV artifacts ('#' lines skipped)
struct csv_table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};
csv_table read_csv(const std::string& path);

// Static SVG figure, one row per trajectory: left panel shows the vortex
// paths on the unit square (+ and x glyphs mark the starting positions of
// degree +1 and -1 vortices; polylines are split wherever the wrapped path
// crosses a period seam, and a motionless trajectory draws no polyline at
// all), right panel shows x_1(t) and y_1(t).  Output is a deterministic
// function of the inputs.
void write_plot(const std::vector<trajectory>& trajs, const std::string& path,
                const std::vector<std::string>& labels = {},
                const std::string& preamble = "");

// flat binary grid snapshot: n*n complex nodes, row-major with node (i,j) at
// (i/n, j/n), each node written as real then imag (two little-endian doubles)
void write_field_binary(const grid_field& f, const std::string& path);

// Executes the configured pipeline and writes its artifacts under
// rc.out_dir.  Returns 0 on success and 1 when a verification command ran to
// completion but its check failed; any tvx error is recorded to
// <out>/error.json and mapped to the error's distinct exit code.
int run_command(const run_config& rc);

}  // namespace tvx
