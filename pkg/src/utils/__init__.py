"""
Hilfsfunktionen für ratkrylov (Dateiformate, Generator-Spezifikationen)
"""
