#pragma once

#include "qfix/deduction.hpp"
#include "qfix/errors.hpp"
#include "qfix/fixpoint.hpp"
#include "qfix/json_io.hpp"
#include "qfix/linalg.hpp"
#include "qfix/mdp.hpp"
#include "qfix/metric_models.hpp"
#include "qfix/pattern.hpp"
#include "qfix/rng.hpp"
#include "qfix/term.hpp"
