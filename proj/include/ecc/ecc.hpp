#pragma once

#include "ecc/cloud.hpp"
#include "ecc/corpus.hpp"
#include "ecc/dynamics.hpp"
#include "ecc/embed.hpp"
#include "ecc/error.hpp"
#include "ecc/io.hpp"
#include "ecc/pca.hpp"
#include "ecc/pipeline.hpp"
#include "ecc/porter.hpp"
#include "ecc/random.hpp"
#include "ecc/stats.hpp"
#include "ecc/synth.hpp"
#include "ecc/textprep.hpp"
