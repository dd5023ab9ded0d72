#pragma once

#include "gatecast/config_io.hpp"
#include "gatecast/error.hpp"
#include "gatecast/eval.hpp"
#include "gatecast/folds.hpp"
#include "gatecast/gradient_check.hpp"
#include "gatecast/gru.hpp"
#include "gatecast/linalg.hpp"
#include "gatecast/lstm.hpp"
#include "gatecast/ohlcv.hpp"
#include "gatecast/params_io.hpp"
#include "gatecast/rng.hpp"
#include "gatecast/scaler.hpp"
#include "gatecast/sequence.hpp"
#include "gatecast/training.hpp"
#include "gatecast/windows.hpp"
