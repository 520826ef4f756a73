#pragma once

#include "vecforge/baselines.hpp"
#include "vecforge/corpus.hpp"
#include "vecforge/embedding.hpp"
#include "vecforge/error.hpp"
#include "vecforge/evaluation.hpp"
#include "vecforge/io.hpp"
#include "vecforge/random.hpp"
#include "vecforge/trainer.hpp"
