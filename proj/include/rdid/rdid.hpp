#pragma once

#include "rdid/csv.hpp"
#include "rdid/dynamics.hpp"
#include "rdid/error.hpp"
#include "rdid/estimation.hpp"
#include "rdid/inference.hpp"
#include "rdid/normal.hpp"
#include "rdid/panel.hpp"
#include "rdid/pipeline.hpp"
#include "rdid/report.hpp"
#include "rdid/rng.hpp"
#include "rdid/simulation.hpp"
#include "rdid/staggered.hpp"
#include "rdid/svg.hpp"
