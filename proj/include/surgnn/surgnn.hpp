#pragma once

#include "surgnn/core.hpp"
#include "surgnn/dataio.hpp"
#include "surgnn/eval.hpp"
#include "surgnn/explain.hpp"
#include "surgnn/features.hpp"
#include "surgnn/gnn.hpp"
#include "surgnn/graph.hpp"
#include "surgnn/graphset.hpp"
#include "surgnn/synth.hpp"
#include "surgnn/train.hpp"
