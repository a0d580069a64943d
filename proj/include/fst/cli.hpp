#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fst/experiment.hpp"
#include "fst/generators.hpp"
#include "fst/io.hpp"
#include "fst/kerdock.hpp"
#include "fst/sketch.hpp"
#include "fst/stream.hpp"

namespace fst {

namespace cli_detail {

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
}

inline std::string format_result_csv(const TransformResult& res) {
  std::string out = "index,value\n";
  char buf[64];
  for (std::size_t i = 0; i < res.support.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g\n", static_cast<long long>(res.support[i]),
                  res.values[i]);
    out += buf;
  }
  return out;
}

inline int run_verify(int k, int cap, double mub_tol, double moment_tol) {
  const DesignParams params = DesignParams::make(k);
  std::printf("k=%d d=%lld L=%lld\n", params.k, static_cast<long long>(params.d),
              static_cast<long long>(params.L));

  bool ok = true;

  const KerdockSet set = build_kerdock_set(params);
  bool skew = true;
  for (const BitMatrix& m : set.matrices) {
    for (int i = 0; i < k && skew; ++i) skew = !m.get(i, i);
    skew = skew && m == m.transposed();
  }
  std::int64_t bad_pairs = 0;
  for (std::size_t a = 0; a < set.matrices.size(); ++a)
    for (std::size_t b = a + 1; b < set.matrices.size(); ++b)
      if (gf2_rank(set.matrices[a] + set.matrices[b]) != k) ++bad_pairs;
  std::printf("kerdock: skew-symmetric %s; %zu matrices, %lld rank-deficient pair sums\n",
              skew ? "yes" : "NO", set.matrices.size(), static_cast<long long>(bad_pairs));
  ok = ok && skew && bad_pairs == 0;

  const MubReport mub = verify_mub(params, cap);
  std::printf("mub: within-basis max dev %.3e; cross |<x,y>|^2 in [%.10g, %.10g], max dev %.3e%s\n",
              mub.max_within_gram_dev, mub.min_cross_sq, mub.max_cross_sq, mub.max_cross_dev,
              mub.exhaustive ? "" : " (sampled basis pairs)");
  ok = ok && mub.pass(mub_tol);

  const MomentReport moments = verify_design_moments(params, cap);
  const double target1 = design_moment_target(params.d, 1);
  const double target2 = design_moment_target(params.d, 2);
  const double tol = moments.exact ? moment_tol : 1e-4;
  std::printf("moments: m1=%.10g (target %.10g), m2=%.10g (target %.10g)%s\n", moments.m1, target1,
              moments.m2, target2, moments.exact ? "" : " (sampled estimate)");
  ok = ok && std::abs(moments.m1 - target1) <= tol && std::abs(moments.m2 - target2) <= tol;

  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace cli_detail

/// CLI entry point. Exit codes: 0 success, 1 verification failure,
/// 2 usage or I/O error.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"fast sparsifying transform for arbitrary matrices"};
  app.require_subcommand(1);

  // gen-matrix
  auto* gen = app.add_subcommand("gen-matrix", "write a Haar-random orthogonal matrix (FSTM)");
  std::int64_t gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--n", gen_n, "matrix dimension")->required();
  gen->add_option("--seed", gen_seed, "PRNG seed")->default_val(0);
  gen->add_option("--out", gen_out, "output FSTM path")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "compute and store the sketch {A s_l} (FSTK)");
  std::string pre_matrix, pre_out;
  pre->add_option("--matrix", pre_matrix, "input FSTM matrix")->required();
  pre->add_option("--out-sketch", pre_out, "output FSTK sketch")->required();

  // transform
  auto* tr = app.add_subcommand("transform", "stream one vector through the sketch");
  std::string tr_sketch, tr_vector, tr_out;
  double tr_eps = 0, tr_delta = 0, tr_gamma = 0, tr_eta = 0.1;
  std::int64_t tr_s = 1, tr_j = 0, tr_k = 0, tr_widen = 10;
  std::uint64_t tr_seed = 0;
  tr->add_option("--sketch", tr_sketch, "FSTK sketch path")->required();
  tr->add_option("--vector", tr_vector, "FSTM vector (one row)")->required();
  tr->add_option("--epsilon", tr_eps, "hard threshold")->required();
  tr->add_option("--delta", tr_delta, "sparsity defect")->default_val(0.0);
  tr->add_option("--s", tr_s, "target sparsity")->required();
  tr->add_option("--J", tr_j, "batch size (default: from the deviation bound)");
  tr->add_option("--K", tr_k, "batch count (default: from the deviation bound)");
  tr->add_option("--widen", tr_widen, "candidate set factor")->default_val(10);
  tr->add_option("--seed", tr_seed, "PRNG seed")->default_val(0);
  tr->add_option("--gamma", tr_gamma, "deviation target (default (epsilon-delta)/2)");
  tr->add_option("--eta", tr_eta, "failure probability for J,K selection")->default_val(0.1);
  tr->add_option("--out", tr_out, "output CSV (default stdout)");

  // verify
  auto* ver = app.add_subcommand("verify", "check the design: Kerdock, MUB, moments");
  int ver_k = 4, ver_cap = 8;
  double ver_mub_tol = 1e-10, ver_moment_tol = 1e-9;
  ver->add_option("--k", ver_k, "design exponent (even)")->required();
  ver->add_option("--cap", ver_cap, "verification cap")->default_val(8);
  ver->add_option("--mub-tol", ver_mub_tol, "MUB tolerance")->default_val(1e-10);
  ver->add_option("--moment-tol", ver_moment_tol, "moment tolerance")->default_val(1e-9);

  // bench
  auto* bench = app.add_subcommand("bench", "run an experiment grid from a config file");
  std::string bench_config, bench_sketch, bench_out;
  bench->add_option("--config", bench_config, "key=value config file")->required();
  bench->add_option("--sketch", bench_sketch, "FSTK sketch (overrides the config's sketch key)");
  bench->add_option("--out", bench_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);

    if (gen->parsed()) {
      write_matrix(gen_out, gen_orthogonal(gen_n, gen_seed));
      return 0;
    }
    if (pre->parsed()) {
      save(preprocess(read_matrix(pre_matrix)), pre_out);
      return 0;
    }
    if (tr->parsed()) {
      const Sketch sk = load(tr_sketch);
      const RowMatrix vec = read_matrix(tr_vector);
      if (vec.rows() != 1)
        throw std::invalid_argument("transform: vector file must be a 1-row FSTM matrix");
      StreamParams params;
      params.epsilon = tr_eps;
      params.delta = tr_delta;
      params.s = tr_s;
      params.widen = tr_widen;
      params.seed = tr_seed;
      if (tr_j > 0 && tr_k > 0) {
        params.J = tr_j;
        params.K = tr_k;
      } else {
        const double gamma = tr_gamma > 0 ? tr_gamma : (tr_eps - tr_delta) / 2;
        std::tie(params.J, params.K) = choose_params(sk.row_norm_max(), gamma, tr_eta, sk.m());
        if (tr_j > 0) params.J = tr_j;
        if (tr_k > 0) params.K = tr_k;
      }
      const TransformResult res = transform(sk, vec.row(0).transpose(), params);
      cli_detail::write_text(tr_out, cli_detail::format_result_csv(res));
      return 0;
    }
    if (ver->parsed()) {
      return cli_detail::run_verify(ver_k, ver_cap, ver_mub_tol, ver_moment_tol);
    }
    if (bench->parsed()) {
      ExperimentConfig cfg = parse_config_file(bench_config);
      const std::string sketch_path = !bench_sketch.empty() ? bench_sketch : cfg.sketch_path;
      if (sketch_path.empty())
        throw std::invalid_argument("bench: no sketch given (config key 'sketch' or --sketch)");
      const std::vector<ExperimentRow> rows = run_experiment(cfg, sketch_path);
      cli_detail::write_text(bench_out, to_csv(rows));
      return 0;
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

inline int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fst
