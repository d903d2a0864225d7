#pragma once

#include "blnn/augment.hpp"
#include "blnn/autodiff.hpp"
#include "blnn/bootstrap.hpp"
#include "blnn/config.hpp"
#include "blnn/encoder.hpp"
#include "blnn/errors.hpp"
#include "blnn/evaluation.hpp"
#include "blnn/graph.hpp"
#include "blnn/io.hpp"
#include "blnn/matrix.hpp"
#include "blnn/objective.hpp"
#include "blnn/random.hpp"
#include "blnn/synth.hpp"
#include "blnn/trainer.hpp"
