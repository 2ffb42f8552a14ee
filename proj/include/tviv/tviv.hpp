#pragma once

#include "tviv/bootstrap.hpp"
#include "tviv/csv.hpp"
#include "tviv/diagnostics.hpp"
#include "tviv/error.hpp"
#include "tviv/estimators.hpp"
#include "tviv/glm.hpp"
#include "tviv/instruments.hpp"
#include "tviv/panel.hpp"
#include "tviv/panel_csv.hpp"
#include "tviv/parallel.hpp"
#include "tviv/random.hpp"
#include "tviv/regression.hpp"
#include "tviv/report.hpp"
#include "tviv/simulator.hpp"
#include "tviv/study.hpp"
