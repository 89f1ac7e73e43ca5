#include "spectemp/train.hpp"

#include "spectemp/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace spectemp::train {

namespace {

void check_batch(const std::vector<Tensor3>& inputs, const std::vector<Tensor3>& targets) {
    if (inputs.empty()) throw DataError("training batch is empty");
    if (inputs.size() != targets.size()) throw ShapeError("batch has mismatched input and target counts");
}

} // namespace

LossAndGrad gradients(const model::ModelState& state, const model::ModelConfig& config,
                      const std::vector<Tensor3>& inputs, const std::vector<Tensor3>& targets) {
    check_batch(inputs, targets);
    ad::Tape tape;
    const auto vars = model::bind_parameters(tape, state, true);
    const auto out = model::forward_graph(tape, vars, state, config, model::pack_batch(inputs));
    const ad::Var loss = model::batch_loss(out.prediction, model::pack_batch(targets), config.nodes, config.horizon);
    tape.backward(loss);
    LossAndGrad result;
    result.loss = loss.value()(0, 0);
    if (!std::isfinite(result.loss)) throw NumericalError("loss is not finite");
    for (const auto& [name, var] : vars) {
        const Matrix& g = var.grad();
        if (!g.allFinite()) throw NumericalError("non-finite gradient for parameter '" + name + "'");
        result.grads[name] = g;
    }
    return result;
}

double batch_loss_value(const model::ModelState& state, const model::ModelConfig& config,
                        const std::vector<Tensor3>& inputs, const std::vector<Tensor3>& targets) {
    check_batch(inputs, targets);
    ad::Tape tape;
    const auto vars = model::bind_parameters(tape, state, false);
    const auto out = model::forward_graph(tape, vars, state, config, model::pack_batch(inputs));
    return model::batch_loss(out.prediction, model::pack_batch(targets), config.nodes, config.horizon).value()(0, 0);
}

void optimizer_step(model::ModelState& state, const Gradients& grads, const AdamOptions& o, AdamState& moments) {
    if (!(o.lr > 0.0)) throw ConfigError("learning rate must be > 0");
    ++moments.step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(moments.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(moments.step));
    for (const auto& [name, g] : grads) {
        auto it = state.params.find(name);
        if (it == state.params.end()) throw ConfigError("gradient for unknown parameter '" + name + "'");
        Matrix& p = it->second;
        if (g.rows() != p.rows() || g.cols() != p.cols()) throw ShapeError("gradient shape mismatch for '" + name + "'");
        auto [mit, m_new] = moments.m.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
        auto [vit, v_new] = moments.v.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
        Matrix& m = mit->second;
        Matrix& v = vit->second;
        m = o.beta1 * m + (1.0 - o.beta1) * g;
        v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
        p.array() -= o.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
    }
}

void write_history_csv(std::ostream& os, const TrainRun& run) {
    os << "epoch,train_loss,val_mae,val_rmse,seconds\n";
    os.precision(12);
    for (const auto& e : run.history) {
        os << e.epoch << ',' << e.train_loss << ',' << e.val_mae << ',' << e.val_rmse << ',' << e.seconds << '\n';
    }
}

std::vector<Tensor3> predict(const model::ModelState& state, const model::ModelConfig& config,
                             const std::vector<Tensor3>& inputs, int batch_size) {
    std::vector<Tensor3> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
        const std::size_t stop = std::min(inputs.size(), start + static_cast<std::size_t>(batch_size));
        const std::vector<Tensor3> batch(inputs.begin() + start, inputs.begin() + stop);
        ad::Tape tape;
        const auto vars = model::bind_parameters(tape, state, false);
        const auto g = model::forward_graph(tape, vars, state, config, model::pack_batch(batch));
        for (auto& y : model::unpack_batch(g.prediction.value(), config.nodes, config.horizon, config.dims)) {
            out.push_back(std::move(y));
        }
    }
    return out;
}

data::ErrorMetrics evaluate(const model::ModelState& state, const model::ModelConfig& config,
                            const data::WindowSet& windows, const data::Normalizer& norm) {
    if (windows.empty()) throw DataError("evaluation set is empty");
    auto predictions = predict(state, config, windows.inputs);
    std::vector<Tensor3> targets;
    targets.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        predictions[i] = norm.inverse(predictions[i]);
        targets.push_back(norm.inverse(windows.targets[i]));
    }
    return data::error_metrics(predictions, targets);
}

TrainRun fit(model::ModelState& state, const model::ModelConfig& config, const data::WindowSet& train_set,
             const data::WindowSet& validation, const data::Normalizer& norm, const TrainOptions& options) {
    if (train_set.empty()) throw DataError("training set is empty");
    if (options.epochs < 0 || options.batch_size < 1) throw ConfigError("epochs must be >= 0 and batch_size >= 1");
    if (!(options.adam.lr > 0.0)) throw ConfigError("learning rate must be > 0");

    TrainRun run;
    run.seed = options.seed;
    run.config = model::to_json(config);
    std::mt19937_64 rng(options.seed);
    AdamState moments;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    double best_mae = std::numeric_limits<double>::infinity();
    model::ModelState best = state;
    int since_best = 0;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
            std::vector<Tensor3> xs, ys;
            for (std::size_t i = start; i < stop; ++i) {
                xs.push_back(train_set.inputs[order[i]]);
                ys.push_back(train_set.targets[order[i]]);
            }
            auto lg = gradients(state, config, xs, ys);
            for (const auto& name : options.frozen) lg.grads.erase(name);
            optimizer_step(state, lg.grads, options.adam, moments);
            loss_sum += lg.loss * static_cast<double>(stop - start);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        if (!validation.empty()) {
            const auto m = evaluate(state, config, validation, norm);
            rec.val_mae = m.mae;
            rec.val_rmse = m.rmse;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.history.push_back(rec);
        if (!state.all_finite()) throw NumericalError("parameters became non-finite at epoch " + std::to_string(epoch));

        if (!validation.empty()) {
            if (rec.val_mae < best_mae) {
                best_mae = rec.val_mae;
                best = state;
                run.best_epoch = epoch;
                since_best = 0;
            } else if (options.patience > 0 && ++since_best >= options.patience) {
                run.stopped_early = true;
                break;
            }
        }
    }
    if (!validation.empty() && run.best_epoch >= 0) state = best;
    return run;
}

} // namespace spectemp::train
