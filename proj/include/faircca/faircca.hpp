#pragma once

#include "faircca/cca.hpp"
#include "faircca/experiment.hpp"
#include "faircca/fairness.hpp"
#include "faircca/io.hpp"
#include "faircca/manifold.hpp"
#include "faircca/optim.hpp"
#include "faircca/synth.hpp"
