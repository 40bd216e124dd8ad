#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hypstruct/diagnostics.hpp"
#include "hypstruct/spectral.hpp"

namespace hypstruct::cli {

namespace {

using training::EmbedMode;

std::uint64_t run_seed(Json& cfg) { return take<std::uint64_t>(cfg, "seed", 0); }

std::string pair_csv(const hierarchy::LabelTree& tree, const std::vector<double>& embedded) {
  std::ostringstream o;
  o << "a,b,tree_distance,embedded_distance\n";
  std::size_t k = 0;
  for (std::size_t i = 0; i < tree.vertex_count(); ++i) {
    for (std::size_t j = i + 1; j < tree.vertex_count(); ++j, ++k) {
      const auto a = static_cast<hierarchy::VertexId>(i), b = static_cast<hierarchy::VertexId>(j);
      o << tree.name(a) << ',' << tree.name(b) << ',' << num(tree.distance(a, b)) << ',' << num(embedded[k]) << '\n';
    }
  }
  return o.str();
}

Scatter pair_scatter(const hierarchy::LabelTree& tree, const std::vector<double>& embedded, std::string title) {
  Scatter s{std::move(title), "tree distance", "embedded distance", {}};
  std::size_t k = 0;
  for (std::size_t i = 0; i < tree.vertex_count(); ++i) {
    for (std::size_t j = i + 1; j < tree.vertex_count(); ++j) {
      s.points.push_back({tree.distance(static_cast<int>(i), static_cast<int>(j)), embedded[k++]});
    }
  }
  return s;
}

std::string matrix_csv(const Matrix& m) {
  std::ostringstream o;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) o << (j ? "," : "") << num(m(i, j));
    o << '\n';
  }
  return o.str();
}

Json restart_json(const training::EmbedResult& r, std::size_t dim) {
  Json j = Json::object();
  j["dim"] = dim;
  j["cpcc"] = r.cpcc;
  j["restart_cpcc"] = r.restart_cpcc;
  return j;
}

/// Encoder features, or the raw features when no checkpoint is given.
struct FeatureMap {
  std::optional<training::Model> model;

  static FeatureMap load(const std::string& checkpoint) {
    FeatureMap f;
    if (!checkpoint.empty()) f.model = load_checkpoint(checkpoint);
    return f;
  }
  Matrix operator()(const Matrix& x) const {
    if (!model) return x;
    if (x.cols() != model->spec.input_dim) {
      throw Error(ErrorCode::DimensionMismatch, "checkpoint expects input dimension " +
                                                    std::to_string(model->spec.input_dim) + ", data has " +
                                                    std::to_string(x.cols()));
    }
    return model->encode(x);
  }
};

}  // namespace

void cmd_embed_tree(Json& cfg, const OutputDir& out) {
  const auto tree = load_tree(cfg);
  const auto seed = run_seed(cfg);
  Json& e = section(cfg, "embed");
  training::EmbedConfig ec;
  ec.restarts = take(e, "restarts", ec.restarts);
  ec.steps = take(e, "steps", ec.steps);
  ec.lr = take(e, "lr", ec.lr);
  ec.init_scale = take(e, "init_scale", ec.init_scale);
  ec.c = geometry::Curvature{take(e, "c", ec.c.value())};
  ec.seed = seed;
  const auto pdim = take<std::size_t>(e, "poincare_dim", 2);
  const auto l2_dims = take(e, "l2_dims", std::vector<std::size_t>{2, 4, 16, 64, 512});
  if (l2_dims.empty()) throw Error(ErrorCode::ValidationError, "l2_dims must not be empty");

  const auto hyp = training::embed_tree_direct(tree, pdim, EmbedMode::poincare, ec);
  const auto hyp_d = training::embedded_pair_distances(hyp.coords, EmbedMode::poincare, ec.c);

  Json l2_runs = Json::array();
  double best_l2 = -2.0;
  std::size_t best_dim = l2_dims.front();
  std::vector<double> best_d;
  for (const auto dim : l2_dims) {
    const auto r = training::embed_tree_direct(tree, dim, EmbedMode::l2, ec);
    const auto d = training::embedded_pair_distances(r.coords, EmbedMode::l2, ec.c);
    out.write("pairs_l2_d" + std::to_string(dim) + ".csv", pair_csv(tree, d));
    l2_runs.push_back(restart_json(r, dim));
    if (r.cpcc > best_l2) best_l2 = r.cpcc, best_dim = dim, best_d = d;
  }

  out.write("pairs_poincare.csv", pair_csv(tree, hyp_d));
  out.write("coords_poincare.csv", matrix_csv(hyp.coords));
  out.write("scatter_poincare.svg", scatter_svg(pair_scatter(tree, hyp_d, "Poincare, dim " + std::to_string(pdim))));
  out.write("scatter_l2.svg", scatter_svg(pair_scatter(tree, best_d, "l2, dim " + std::to_string(best_dim))));
  if (pdim == 2) {
    std::vector<std::string> names;
    std::vector<int> parents;
    for (std::size_t v = 0; v < tree.vertex_count(); ++v) {
      names.push_back(tree.name(static_cast<int>(v)));
      parents.push_back(tree.parent(static_cast<int>(v)));
    }
    out.write("disk_poincare.svg", disk_svg(hyp.coords, ec.c.radius(), names, parents));
  }

  Json res = Json::object();
  res["poincare"] = restart_json(hyp, pdim);
  res["l2"] = l2_runs;
  res["l2_best"] = {{"dim", best_dim}, {"cpcc", best_l2}};
  res["poincare_at_least_l2"] = hyp.cpcc >= best_l2;
  out.write_json("embed.json", report("embed-tree", cfg, res));
}

void cmd_train(Json& cfg, const OutputDir& out) {
  const auto tree = load_tree(cfg);
  const auto seed = run_seed(cfg);
  const auto method = take<std::string>(cfg, "method", "hypstructure");
  objective::ObjectiveConfig preset;
  if (method == "flat") {
    preset.alpha = 0.0;
    preset.beta = 0.0;
  } else if (method == "l2_cpcc") {
    preset.beta = 0.0;
    preset.cpcc_geometry = objective::CpccGeometry::euclidean;
  } else if (method != "hypstructure") {
    throw Error(ErrorCode::ValidationError, "method must be one of flat, l2_cpcc, hypstructure");
  }
  const auto obj = read_objective(section(cfg, "objective"), preset);
  const auto src = load_dataset(section(cfg, "dataset"), tree, seed);

  Json& en = section(cfg, "encoder");
  training::EncoderSpec enc;
  enc.kind = take_enum(en, "kind", enc.kind,
                       {{"linear", training::EncoderKind::linear}, {"mlp_1hidden", training::EncoderKind::mlp_1hidden}});
  enc.input_dim = take(en, "input_dim", src.data.dim());
  enc.hidden_dim = take(en, "hidden_dim", enc.hidden_dim);
  enc.output_dim = take(en, "output_dim", enc.output_dim);
  enc.seed = take(en, "seed", seed);

  Json& t = section(cfg, "train");
  training::TrainConfig tc;
  tc.epochs = take(t, "epochs", tc.epochs);
  tc.batch_size = take(t, "batch_size", std::min(tc.batch_size, src.data.size()));
  tc.lr0 = take(t, "lr0", tc.lr0);
  tc.momentum = take(t, "momentum", tc.momentum);
  tc.schedule = take_enum(t, "schedule", tc.schedule,
                          {{"constant", training::Schedule::constant}, {"cosine", training::Schedule::cosine}});
  tc.view_noise = take(t, "view_noise", tc.view_noise);
  tc.seed = take(t, "seed", seed);

  const auto result = training::train(src.data, tree, enc, obj, tc);

  out.write("checkpoint.json", training::checkpoint_json(result.model, cfg.dump()));
  std::ostringstream hist;
  training::write_history_csv(hist, result.history);
  out.write("history.csv", hist.str());

  const auto& last = result.history.back();
  Json res = Json::object();
  res["method"] = method;
  res["epochs"] = last.epoch;
  res["final_train_cpcc"] = last.cpcc ? Json(*last.cpcc) : Json();
  res["final_flat_loss"] = last.flat;
  res["final_center_loss"] = last.center;
  res["initial_train_cpcc"] = result.history.front().cpcc ? Json(*result.history.front().cpcc) : Json();
  res["skipped_cpcc_batches"] = result.skipped_cpcc_batches;
  res["parameter_count"] = result.model.parameter_count();
  out.write_json("summary.json", report("train", cfg, res));
}

void cmd_eval(Json& cfg, const OutputDir& out) {
  const auto tree = load_tree(cfg);
  const auto seed = run_seed(cfg);
  const auto features = FeatureMap::load(take<std::string>(cfg, "checkpoint", ""));
  const auto train_src = load_dataset(section(cfg, "train_dataset"), tree, seed);
  const auto eval_src = load_dataset(section(cfg, "eval_dataset"), tree, seed, seed + 1000);
  const auto k = take<std::size_t>(cfg, "knn_k", 5);
  const geometry::Curvature c{take(cfg, "c", 1.0)};
  Json& dn = section(cfg, "delta");
  const auto mode = take<std::string>(dn, "mode", "auto");
  diagnostics::DeltaOptions dopt;
  dopt.samples = take(dn, "samples", dopt.samples);
  dopt.seed = take(dn, "seed", seed);
  const bool gram = take(cfg, "gram_csv", false);

  const Matrix z_train = features(train_src.data.features);
  const Matrix z_eval = features(eval_src.data.features);
  const auto& labels = eval_src.data.labels;

  if (mode == "auto") {
    dopt.mode = z_eval.rows() <= diagnostics::kExactDeltaLimit ? diagnostics::DeltaOptions::Mode::exact
                                                                : diagnostics::DeltaOptions::Mode::sampled;
  } else if (mode == "exact" || mode == "sampled") {
    dopt.mode = mode == "exact" ? diagnostics::DeltaOptions::Mode::exact : diagnostics::DeltaOptions::Mode::sampled;
  } else {
    throw Error(ErrorCode::ValidationError, "delta.mode must be one of auto, exact, sampled");
  }
  const auto delta = diagnostics::delta_hyperbolicity(diagnostics::DistanceMatrix::euclidean(z_eval), dopt);

  Json res = Json::object();
  res["delta_rel"] = delta.delta_rel ? Json(*delta.delta_rel) : Json();
  res["delta"] = delta.delta;
  res["diameter"] = delta.diameter;
  res["delta_mode"] = dopt.mode == diagnostics::DeltaOptions::Mode::exact ? "exact" : "sampled";
  res["test_cpcc"] = {
      {"l2", diagnostics::test_cpcc(z_eval, labels, tree, diagnostics::DistanceMode::l2, c)},
      {"poincare", diagnostics::test_cpcc(z_eval, labels, tree, diagnostics::DistanceMode::poincare, c)}};
  const auto& tl = train_src.data.labels;
  res["knn_fine_accuracy"] = *diagnostics::knn_classify(z_train, tl, z_eval, labels, k, diagnostics::Level::fine, tree).accuracy;
  res["knn_coarse_accuracy"] =
      *diagnostics::knn_classify(z_train, tl, z_eval, labels, k, diagnostics::Level::coarse, tree).accuracy;

  if (gram) out.write("gram.csv", matrix_csv(spectral::gram_matrix(z_eval, labels, tree).K));
  out.write_json("eval.json", report("eval", cfg, res));
}

void cmd_spectra(Json& cfg, const OutputDir& out) {
  run_seed(cfg);
  const auto source = take<std::string>(cfg, "source", "block_spec");
  const auto top_k = take<std::size_t>(cfg, "top_k", 100);
  Matrix K;
  std::optional<spectral::EigenSpectrum> closed;
  Json warnings = Json::array();

  if (source == "block_spec") {
    Json& b = section(cfg, "block_spec");
    const auto r = take(b, "r", std::vector<double>{0.8, 0.2});
    std::optional<hierarchy::LabelTree> tree;
    std::vector<std::size_t> counts;
    if (b.contains("tree")) {
      tree = load_tree(b);
    } else {
      counts = take(b, "level_counts", std::vector<std::size_t>{1, 2, 4});
      tree = hierarchy::balanced_tree(counts);
    }
    const spectral::BlockCorrelationSpec spec{*tree, r};
    for (const auto& w : spec.warnings()) warnings.push_back(w);
    K = spectral::build_block_matrix(spec);
    if (!counts.empty()) {
      std::vector<std::size_t> leaves_first(counts.rbegin(), counts.rend());
      closed = spectral::balanced_eigenvalues_closed_form(leaves_first, r);
    }
  } else if (source == "matrix_csv") {
    K = read_matrix_csv(take<std::string>(cfg, "matrix_csv", ""));
    if (K.rows() != K.cols() || K.rows() == 0) throw Error(ErrorCode::InvalidArgument, "matrix must be square and non-empty");
  } else if (source == "features") {
    const auto tree = load_tree(cfg);
    const auto features = FeatureMap::load(take<std::string>(cfg, "checkpoint", ""));
    const auto src = load_dataset(section(cfg, "dataset"), tree, take<std::uint64_t>(cfg, "seed", 0));
    K = spectral::gram_matrix(features(src.data.features), src.data.labels, tree).K;
  } else {
    throw Error(ErrorCode::ValidationError, "source must be one of block_spec, matrix_csv, features");
  }

  const auto numerical = spectral::numerical_eigenvalues(K);
  std::ostringstream ns;
  spectral::write_spectrum_csv(ns, numerical);
  out.write("spectrum_numerical.csv", ns.str());

  Json res = Json::object();
  res["order"] = numerical.order();
  res["trace"] = numerical.trace();
  res["closed_form"] = closed.has_value();
  res["max_abs_discrepancy"] = Json();
  if (closed) {
    std::ostringstream cs;
    spectral::write_spectrum_csv(cs, *closed);
    out.write("spectrum_closed_form.csv", cs.str());
    const auto a = numerical.expanded(), b = closed->expanded();
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "closed-form and numerical orders differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    res["max_abs_discrepancy"] = worst;
  }
  Json gaps = Json::array();
  if (numerical.order() >= 2) {
    for (const auto& g : spectral::phase_transition_detect(numerical, top_k)) {
      gaps.push_back({{"position", g.position}, {"relative_drop", g.relative_drop}});
    }
  }
  res["dominant_gap_position"] = gaps.empty() ? Json() : gaps.front()["position"];
  res["transitions"] = gaps;
  res["warnings"] = warnings;
  out.write_json("spectra.json", report("spectra", cfg, res));
}

void cmd_oodsim(Json& cfg, const OutputDir& out) {
  const auto tree = load_tree(cfg);
  const auto seed = run_seed(cfg);
  const bool standardize = take(cfg, "standardize", true);
  const auto bins = take<std::size_t>(cfg, "histogram_bins", 20);
  if (bins == 0) throw Error(ErrorCode::ValidationError, "histogram_bins must be positive");

  Json& methods = required(cfg, "methods");
  if (!methods.is_array() || methods.empty()) throw Error(ErrorCode::ValidationError, "methods must be a non-empty array");
  const auto id_train = load_dataset(section(cfg, "id_train"), tree, seed);
  const auto id_eval = load_dataset(section(cfg, "id_eval"), tree, seed, seed + 1000);

  if (!cfg.contains("ood")) {
    cfg["ood"] = Json::array({{{"name", "far_cluster"}, {"synthetic", Json::object()}}});
  }
  Json& ood_list = cfg["ood"];
  if (!ood_list.is_array() || ood_list.empty()) throw Error(ErrorCode::ValidationError, "ood must be a non-empty array");
  std::vector<std::string> ood_names;
  std::vector<Matrix> ood_sets;
  for (auto& o : ood_list) {
    ood_names.push_back(take<std::string>(o, "name", "ood" + std::to_string(ood_names.size())));
    if (o.contains("csv")) {
      ood_sets.push_back(read_matrix_csv(take<std::string>(o, "csv", "")));
      continue;
    }
    if (!id_train.synthetic) throw Error(ErrorCode::ValidationError, "a synthetic OOD set needs a synthetic id_train");
    Json& s = section(o, "synthetic");
    training::OodSpec spec;
    spec.kind = take_enum(s, "kind", training::OodKind::far_cluster,
                          {{"novel_leaf", training::OodKind::novel_leaf},
                           {"far_cluster", training::OodKind::far_cluster},
                           {"in_distribution", training::OodKind::in_distribution}});
    spec.n = take(s, "n", spec.n);
    spec.far_sigmas = take(s, "far_sigmas", spec.far_sigmas);
    spec.seed = take(s, "seed", seed);
    ood_sets.push_back(training::generate_ood(*id_train.synthetic, spec));
  }
  for (std::size_t s = 0; s < ood_sets.size(); ++s) {
    if (ood_sets[s].rows() == 0) throw Error(ErrorCode::EmptyInput, "OOD set '" + ood_names[s] + "' is empty");
  }

  std::vector<std::string> method_names;
  std::vector<std::vector<std::optional<double>>> table;
  Json auroc = Json::object();
  std::ostringstream hist;
  hist << "method,set,ood_set,bin,lo,hi,count\n";
  for (auto& m : methods) {
    const auto name = take<std::string>(m, "name", "method" + std::to_string(method_names.size()));
    const auto features = FeatureMap::load(take<std::string>(m, "checkpoint", ""));
    const Matrix z_train = features(id_train.data.features);
    const Matrix z_eval = features(id_eval.data.features);
    method_names.push_back(name);
    table.emplace_back();
    Json row = Json::object();
    for (std::size_t s = 0; s < ood_sets.size(); ++s) {
      const auto rep = diagnostics::mahalanobis_ood(z_train, z_eval, features(ood_sets[s]), standardize);
      row[ood_names[s]] = rep.auroc;
      table.back().push_back(rep.auroc);

      double lo = rep.id_scores.front(), hi = lo;
      for (const auto* v : {&rep.id_scores, &rep.ood_scores}) {
        for (double x : *v) lo = std::min(lo, x), hi = std::max(hi, x);
      }
      const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
      for (const auto& [set, scores] : {std::pair{"id_eval", &rep.id_scores}, std::pair{"ood", &rep.ood_scores}}) {
        std::vector<std::size_t> counts(bins, 0);
        for (double x : *scores) counts[std::min(bins - 1, static_cast<std::size_t>((x - lo) / width))]++;
        for (std::size_t b = 0; b < bins; ++b) {
          hist << name << ',' << set << ',' << ood_names[s] << ',' << b << ',' << num(lo + width * b) << ','
               << num(lo + width * (b + 1)) << ',' << counts[b] << '\n';
        }
      }
    }
    auroc[name] = row;
  }
  out.write("ood_scores_histogram.csv", hist.str());

  Json res = Json::object();
  res["auroc"] = auroc;
  if (method_names.size() >= 2) {
    const auto points = diagnostics::borda_count(table);
    std::ostringstream b;
    b << "method,points\n";
    Json borda = Json::object();
    for (std::size_t i = 0; i < points.size(); ++i) {
      b << method_names[i] << ',' << num(points[i]) << '\n';
      borda[method_names[i]] = points[i];
    }
    out.write("borda.csv", b.str());
    res["borda"] = borda;
  }
  out.write_json("ood.json", report("oodsim", cfg, res));
}

}  // namespace hypstruct::cli
