"""Capa de servicios: álgebra exacta de homeomorfismos del círculo y estimadores.

Los servicios no dependen de ``current_app``; reciben todos sus parámetros
explícitamente para poder ejecutarse en procesos de trabajo.
"""
