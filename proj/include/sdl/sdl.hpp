#ifndef SDL_SDL_HPP
#define SDL_SDL_HPP

#include "sdl/common.hpp"
#include "sdl/features.hpp"
#include "sdl/wav.hpp"
#include "sdl/chordgen.hpp"
#include "sdl/dictionary_set.hpp"
#include "sdl/sparse_coding.hpp"
#include "sdl/dictionary_learning.hpp"
#include "sdl/ksvd.hpp"
#include "sdl/svm.hpp"
#include "sdl/model_store.hpp"
#include "sdl/experiment.hpp"

#endif  // SDL_SDL_HPP
