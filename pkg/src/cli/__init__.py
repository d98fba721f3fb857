"""
Kommandozeilen-Module für ratkrylov
"""
