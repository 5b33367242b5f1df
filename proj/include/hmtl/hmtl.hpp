#pragma once

#include "hmtl/autodiff.hpp"
#include "hmtl/checkpoint.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/encoder.hpp"
#include "hmtl/error.hpp"
#include "hmtl/evaluation.hpp"
#include "hmtl/labels.hpp"
#include "hmtl/matrix.hpp"
#include "hmtl/metrics.hpp"
#include "hmtl/mtl.hpp"
#include "hmtl/random.hpp"
#include "hmtl/run_config.hpp"
#include "hmtl/textnorm.hpp"
#include "hmtl/tokenizer.hpp"
#include "hmtl/training.hpp"
#include "hmtl/unicode.hpp"
