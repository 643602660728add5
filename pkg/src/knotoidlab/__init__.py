"""Knotoids, pseudo knotoids and braidoids of the annulus.

Core objects:

* :class:`knotoidlab.diagram.PuncturedDiagram` -- combinatorial diagrams with
  ray markers encoding winding around the annulus axis.
* :mod:`knotoidlab.bracket` -- the extended Kauffman bracket in (A, t, V),
  its normalisation and Jones specialisation.
* :mod:`knotoidlab.moves` -- Reidemeister / pseudo-Reidemeister rewriting.
* :mod:`knotoidlab.braidoid` -- mixed braidoids, closure, L-moves and the
  braidoiding (Alexander-direction) algorithm.
"""

__version__ = "0.1.0"
