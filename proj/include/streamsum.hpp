#ifndef STREAMSUM_HPP
#define STREAMSUM_HPP

#include "streamsum/analysis.hpp"
#include "streamsum/baselines.hpp"
#include "streamsum/corpus.hpp"
#include "streamsum/error.hpp"
#include "streamsum/features.hpp"
#include "streamsum/io.hpp"
#include "streamsum/learner.hpp"
#include "streamsum/metrics.hpp"
#include "streamsum/policy.hpp"
#include "streamsum/resources.hpp"
#include "streamsum/runner.hpp"
#include "streamsum/synthetic.hpp"
#include "streamsum/textrep.hpp"

#endif
