#pragma once

#include "setrec/common.hpp"
#include "setrec/config.hpp"
#include "setrec/corpus.hpp"
#include "setrec/errors.hpp"
#include "setrec/eval.hpp"
#include "setrec/features.hpp"
#include "setrec/linalg.hpp"
#include "setrec/models.hpp"
#include "setrec/runner.hpp"
#include "setrec/serialize.hpp"
#include "setrec/stats.hpp"
#include "setrec/tensor.hpp"
