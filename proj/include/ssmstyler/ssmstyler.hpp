#pragma once

#include "adam.hpp"
#include "bench.hpp"
#include "checkpoint.hpp"
#include "corpus.hpp"
#include "decoder.hpp"
#include "dsp.hpp"
#include "error.hpp"
#include "fusion.hpp"
#include "gradcheck.hpp"
#include "linalg.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "speech.hpp"
#include "ssm.hpp"
#include "text.hpp"
#include "train.hpp"
#include "wav.hpp"
