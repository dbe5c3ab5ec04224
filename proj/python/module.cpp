#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "udkit/conllu.hpp"

namespace py = pybind11;
using namespace udkit;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Universal Dependencies processing toolkit";

  py::class_<conllu::Word>(m, "Word")
      .def(py::init<>())
      .def_readwrite("id", &conllu::Word::id)
      .def_readwrite("form", &conllu::Word::form)
      .def_readwrite("lemma", &conllu::Word::lemma)
      .def_readwrite("upos", &conllu::Word::upos)
      .def_readwrite("xpos", &conllu::Word::xpos)
      .def_readwrite("ufeats", &conllu::Word::ufeats)
      .def_readwrite("head", &conllu::Word::head)
      .def_readwrite("deprel", &conllu::Word::deprel)
      .def("__repr__", [](const conllu::Word& w) {
        return "<Word " + std::to_string(w.id) + " " + w.form + ">";
      });

  py::class_<conllu::Sentence>(m, "Sentence")
      .def(py::init<>())
      .def_readwrite("words", &conllu::Sentence::words)
      .def_readwrite("text", &conllu::Sentence::text);

  py::class_<conllu::Document>(m, "Document")
      .def(py::init<>())
      .def_readwrite("sentences", &conllu::Document::sentences)
      .def("word_count", &conllu::Document::word_count);

  m.def("read_conllu", &conllu::read_string, py::arg("text"),
        "Parse CoNLL-U text into a Document");
  m.def("write_conllu", &conllu::write_string, py::arg("doc"),
        "Serialize a Document to CoNLL-U text");
}
