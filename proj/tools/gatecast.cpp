// gatecast: ingest OHLCV data, train LSTM/GRU forecasters, compare them, predict.

#include <iostream>

#include "CLI11.hpp"
#include "gatecast/cli.hpp"

int main(int argc, char** argv) {
    using namespace gatecast;
    CLI::App app{"LSTM vs GRU next-day close forecasting"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* ing = app.add_subcommand("ingest", "Load and summarize an OHLCV CSV");
    ing->add_option("--csv", ingest.csv, "Input CSV")->required();
    ing->add_option("--report", ingest.report, "Write a JSON report here");
    ing->add_option("--manifest", ingest.manifest, "Run manifest path (default <report>.manifest.json)");

    TrainArgs train;
    std::uint64_t seed = 0;
    std::size_t epochs = 0, hidden = 0;
    double lambda = 0.0;
    auto* tr = app.add_subcommand("train", "Cross-validate, retrain and evaluate one cell");
    tr->add_option("--csv", train.csv, "Input CSV")->required();
    tr->add_option("--config", train.config, "JSON config")->required();
    tr->add_option("--cell", train.cell, "lstm or gru (overrides config)")->check(CLI::IsMember({"lstm", "gru"}));
    tr->add_option("--out", train.out, "Output directory")->required();
    auto* seed_opt = tr->add_option("--seed", seed, "Override config seed");
    auto* epochs_opt = tr->add_option("--epochs", epochs, "Override config epochs");
    auto* hidden_opt = tr->add_option("--hidden-size", hidden, "Override config hidden_size");
    auto* lambda_opt = tr->add_option("--lambda", lambda, "Override config lambda");
    tr->add_option("--jobs", train.jobs, "Worker threads for CV folds")->check(CLI::PositiveNumber);
    tr->add_option("--test-fraction", train.test_fraction, "Most recent fraction held out for testing");

    CompareArgs cmp;
    auto* co = app.add_subcommand("compare", "LSTM vs GRU over several seeds");
    co->add_option("--csv", cmp.csv, "Input CSV")->required();
    co->add_option("--config", cmp.config, "JSON config")->required();
    co->add_option("--seeds", cmp.seeds, "Seed list, e.g. 1,2,3 or 1-5")->required();
    co->add_option("--out", cmp.out, "Output directory")->required();
    co->add_option("--jobs", cmp.jobs, "Worker threads for CV folds")->check(CLI::PositiveNumber);
    co->add_option("--lambda-grid", cmp.lambda_grid, "Select lambda per arm by CV over these values")->delimiter(',');
    co->add_option("--test-fraction", cmp.test_fraction, "Most recent fraction held out for testing");

    PredictArgs pred;
    auto* pr = app.add_subcommand("predict", "Next-step close predictions from a saved model");
    pr->add_option("--model", pred.model, "model.json from train")->required();
    pr->add_option("--csv", pred.csv, "Input CSV")->required();
    pr->add_flag("--last-window-only", pred.last_window_only, "Only predict past the last record");
    pr->add_option("--out", pred.out, "Output CSV (default stdout)");
    pr->add_option("--manifest", pred.manifest, "Run manifest path (default <out>.manifest.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code::input;
    }

    if (*ing) return cmd_ingest(ingest, std::cout, std::cerr);
    if (*tr) {
        if (*seed_opt) train.overrides.seed = seed;
        if (*epochs_opt) train.overrides.epochs = epochs;
        if (*hidden_opt) train.overrides.hidden_size = hidden;
        if (*lambda_opt) train.overrides.lambda = lambda;
        return cmd_train(train, std::cout, std::cerr);
    }
    if (*co) return cmd_compare(cmp, std::cout, std::cerr);
    return cmd_predict(pred, std::cout, std::cerr);
}
