#pragma once

#include "blapose/augmentation.hpp"
#include "blapose/bench.hpp"
#include "blapose/camera.hpp"
#include "blapose/corpus.hpp"
#include "blapose/error.hpp"
#include "blapose/evaluation.hpp"
#include "blapose/io.hpp"
#include "blapose/length_model.hpp"
#include "blapose/metrics.hpp"
#include "blapose/pipeline.hpp"
#include "blapose/plot.hpp"
#include "blapose/random.hpp"
#include "blapose/sequence.hpp"
#include "blapose/skeleton.hpp"
#include "blapose/tensor_bundle.hpp"
#include "blapose/toy_lifter.hpp"
