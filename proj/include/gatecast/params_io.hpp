#pragma once

// Parameter file format (JSON, version 1):
//
//   {
//     "format": "gatecast.params",
//     "version": 1,
//     "cell_kind": "lstm" | "gru",
//     "hidden_size": H,
//     "input_size": D,
//     "with_bias": false,            // GRU gate biases present
//     "init_seed": S,                // seed the weights were initialized from
//     "tensors": [ {"name": "W_xi", "rows": H, "cols": D, "data": [row-major values]}, ... ]
//   }
//
// Tensors appear in a fixed order per cell kind:
//   lstm: W_xi W_hi W_ci b_i W_xf W_hf W_cf b_f W_xc W_hc b_c W_xo W_ho W_co b_o W_out b_out
//   gru:  W_z U_z W_r U_r W U [b_z b_r b_h] W_out b_out
// Values are written with shortest round-trip formatting, so save/load is bit-exact.

#include <cstdint>
#include <string>
#include <vector>

#include "gatecast/sequence.hpp"
#include "json.hpp"

namespace gatecast {

inline constexpr const char* params_format = "gatecast.params";
inline constexpr int params_version = 1;

inline nlohmann::json params_to_json(const ModelParams& params, std::uint64_t init_seed) {
    nlohmann::json j;
    j["format"] = params_format;
    j["version"] = params_version;
    j["cell_kind"] = std::string(to_string(cell_kind(params)));
    j["init_seed"] = init_seed;
    std::visit(
        [&](const auto& p) {
            j["hidden_size"] = p.hidden_size;
            j["input_size"] = p.input_size;
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, GruParams>)
                j["with_bias"] = p.with_bias;
            else
                j["with_bias"] = false;
            auto tensors = nlohmann::json::array();
            p.for_each([&](const char* name, const Matrix& m, bool) {
                tensors.push_back({{"name", name},
                                   {"rows", m.rows()},
                                   {"cols", m.cols()},
                                   {"data", std::vector<double>(m.values().begin(), m.values().end())}});
            });
            j["tensors"] = std::move(tensors);
        },
        params);
    return j;
}

struct LoadedParams {
    ModelParams params;
    std::uint64_t init_seed = 0;
};

inline LoadedParams params_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != params_format)
            throw FormatError("not a gatecast parameter document");
        if (j.at("version").get<int>() != params_version)
            throw FormatError("unsupported parameter format version " + j.at("version").dump());
        const auto kind = parse_cell_kind(j.at("cell_kind").get<std::string>());
        const auto hidden = j.at("hidden_size").get<std::size_t>();
        const auto input = j.at("input_size").get<std::size_t>();
        if (hidden == 0 || input == 0) throw FormatError("hidden_size and input_size must be positive");

        ModelParams params = kind == CellKind::lstm
                                 ? ModelParams(LstmParams::zeros(hidden, input))
                                 : ModelParams(GruParams::zeros(hidden, input, j.value("with_bias", false)));
        const auto& tensors = j.at("tensors");
        std::visit(
            [&](auto& p) {
                std::size_t idx = 0;
                p.for_each([&](const char* name, Matrix& m, bool) {
                    if (idx >= tensors.size()) throw FormatError(std::string("missing tensor ") + name);
                    const auto& t = tensors[idx++];
                    if (t.at("name").get<std::string>() != name)
                        throw FormatError("tensor " + std::to_string(idx - 1) + " is '" +
                                          t.at("name").get<std::string>() + "', expected '" + name + "'");
                    const auto rows = t.at("rows").get<std::size_t>(), cols = t.at("cols").get<std::size_t>();
                    if (rows != m.rows() || cols != m.cols())
                        throw FormatError(std::string("tensor ") + name + " has shape " +
                                          Matrix::shape_string(rows, cols) + ", expected " + m.shape());
                    m = Matrix(rows, cols, t.at("data").get<std::vector<double>>());
                });
                if (idx != tensors.size()) throw FormatError("unexpected extra tensors");
            },
            params);
        return {std::move(params), j.at("init_seed").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed parameter document: ") + e.what());
    } catch (const ShapeError& e) {
        throw FormatError(std::string("malformed parameter document: ") + e.what());
    }
}

}  // namespace gatecast
