#pragma once

#include "config.hpp"
#include "report.hpp"

namespace hypstruct::cli {

/// Each command resolves `cfg` in place (so it can be echoed afterwards),
/// writes its artifacts into `out` and throws hypstruct::Error on failure.
void cmd_embed_tree(Json& cfg, const OutputDir& out);
void cmd_train(Json& cfg, const OutputDir& out);
void cmd_eval(Json& cfg, const OutputDir& out);
void cmd_spectra(Json& cfg, const OutputDir& out);
void cmd_oodsim(Json& cfg, const OutputDir& out);

}  // namespace hypstruct::cli
